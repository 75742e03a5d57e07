"""Scenario configuration: JSON documents in, validated Scenario objects out.

One structured JSON document describes one scenario: physical network data,
bases, PLL gains, fault event, dispatch, ride-through policy, and solver
settings. Documents are schema-checked strictly (unknown keys rejected,
violations name the offending field) and round-trip exactly through
``emit``/``parse_config``. The packaged ``data/`` directory carries the six
reference study cases.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Union

from .errors import ParseError, ValidationError
from .model import CurrentInjection, PllParams
from .network import FaultType, MmcSource, PhysicalNetwork, per_unit_network
from .simulate import LvrtPolicy, Scenario

_SCHEMA: dict[str, Any] = {
    "name": str,
    "base_mva": float,
    "base_kv": float,
    "network": {
        "wtg_tr": {"sn_mva": float, "uk_percent": float, "count": int},
        "feeder": {"r_ohm": float, "x_ohm": float, "kv": float},
        "owf_tr": {"sn_mva": float, "uk_percent": float},
        "cable": {
            "r_ohm_per_km": float,
            "x_ohm_per_km": float,
            "length_km": float,
            "n_circuits": int,
        },
    },
    "mmc": {"u_mmc_pos": float, "i_lim": float},
    "pll": {"kp": float, "ki": float, "f_hz": float},
    "fault": {
        "type": str,
        "location": float,
        "z_eq": (float, type(None)),
        "t_fault": float,
        "fct": float,
    },
    "injection": {"isd": float, "isq": float},
    "lvrt": {
        "enabled": bool,
        "v_enter": float,
        "v_exit": float,
        "hold": float,
        "i_max": float,
        "k_q": float,
    },
    "sim": {"dt": float, "horizon": (float, type(None))},
    "output": {"decimate": int},
}

_FAULT_TYPES = {ft.value: ft for ft in FaultType}


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated mirror of one scenario document."""

    name: str
    base_mva: float
    base_kv: float
    network: PhysicalNetwork
    mmc: MmcSource
    pll_kp: float
    pll_ki: float
    f_hz: float
    fault_type: FaultType
    fault_location: float
    fault_z_eq: Optional[float]
    t_fault: float
    fct: float
    injection: CurrentInjection
    lvrt: LvrtPolicy
    dt: float
    horizon: Optional[float]
    decimate: int = 1

    def scenario(self) -> Scenario:
        from .network import FaultSpec

        return Scenario(
            pll=PllParams(self.pll_kp, self.pll_ki, 2.0 * math.pi * self.f_hz),
            net=per_unit_network(self.network, self.base_mva, self.base_kv),
            mmc=self.mmc,
            fault=FaultSpec(
                fault_type=self.fault_type,
                location=self.fault_location,
                z_eq=self.fault_z_eq,
                t_fault=self.t_fault,
                fct=self.fct,
            ),
            base_injection=self.injection,
            lvrt=self.lvrt,
            dt=self.dt,
            horizon=self.horizon,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "base_mva": self.base_mva,
            "base_kv": self.base_kv,
            "network": {
                "wtg_tr": {
                    "sn_mva": self.network.wtg_tr_unit_mva,
                    "uk_percent": self.network.wtg_tr_uk_percent,
                    "count": self.network.n_wtg,
                },
                "feeder": {
                    "r_ohm": self.network.feeder_r_ohm,
                    "x_ohm": self.network.feeder_x_ohm,
                    "kv": self.network.feeder_kv,
                },
                "owf_tr": {
                    "sn_mva": self.network.owf_tr_mva,
                    "uk_percent": self.network.owf_tr_uk_percent,
                },
                "cable": {
                    "r_ohm_per_km": self.network.cable_r_ohm_per_km,
                    "x_ohm_per_km": self.network.cable_x_ohm_per_km,
                    "length_km": self.network.cable_length_km,
                    "n_circuits": self.network.n_circuits,
                },
            },
            "mmc": {"u_mmc_pos": self.mmc.u_mmc_pos, "i_lim": self.mmc.i_lim},
            "pll": {"kp": self.pll_kp, "ki": self.pll_ki, "f_hz": self.f_hz},
            "fault": {
                "type": self.fault_type.value,
                "location": self.fault_location,
                "z_eq": self.fault_z_eq,
                "t_fault": self.t_fault,
                "fct": self.fct,
            },
            "injection": {"isd": self.injection.isd, "isq": self.injection.isq},
            "lvrt": {
                "enabled": self.lvrt.enabled,
                "v_enter": self.lvrt.v_enter,
                "v_exit": self.lvrt.v_exit,
                "hold": self.lvrt.hold,
                "i_max": self.lvrt.i_max,
                "k_q": self.lvrt.k_q,
            },
            "sim": {"dt": self.dt, "horizon": self.horizon},
            "output": {"decimate": self.decimate},
        }


def emit(config: ScenarioConfig) -> str:
    """Canonical JSON form; parse_config(emit(c)) == c."""
    return json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n"


def parse_config(source: Union[str, Path]) -> ScenarioConfig:
    """Load and validate a scenario document from a file path."""
    path = Path(source)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, name_hint=path.stem)


def parse_config_text(text: str, name_hint: str = "scenario") -> ScenarioConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("top level must be a JSON object")
    _check_keys(doc, _SCHEMA, prefix="")
    return _build(doc, name_hint)


def _check_keys(doc: dict, schema: dict, prefix: str) -> None:
    for key in doc:
        where = f"{prefix}{key}"
        if key not in schema:
            raise ValidationError(where, "unknown key")
        if isinstance(schema[key], dict):
            if not isinstance(doc[key], dict):
                raise ValidationError(where, "must be an object")
            _check_keys(doc[key], schema[key], prefix=f"{where}.")


_MISSING = object()


def _get(doc: dict, path: str, types, default=_MISSING):
    node: Any = doc
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            if default is not _MISSING:
                return default
            raise ValidationError(path, "missing required field")
        node = node[part]
    if types is float and isinstance(node, int) and not isinstance(node, bool):
        node = float(node)
    if not isinstance(node, types) or isinstance(node, bool) and types is not bool:
        raise ValidationError(path, f"expected {types}, got {type(node).__name__}")
    return node


def _build(doc: dict, name_hint: str) -> ScenarioConfig:
    name = _get(doc, "name", str, default=name_hint)
    base_mva = _get(doc, "base_mva", float)
    base_kv = _get(doc, "base_kv", float)
    if base_mva <= 0:
        raise ValidationError("base_mva", "must be > 0")
    if base_kv <= 0:
        raise ValidationError("base_kv", "must be > 0")

    net = PhysicalNetwork(
        wtg_tr_unit_mva=_get(doc, "network.wtg_tr.sn_mva", float),
        wtg_tr_uk_percent=_get(doc, "network.wtg_tr.uk_percent", float),
        n_wtg=_get(doc, "network.wtg_tr.count", int),
        feeder_r_ohm=_get(doc, "network.feeder.r_ohm", float),
        feeder_x_ohm=_get(doc, "network.feeder.x_ohm", float),
        feeder_kv=_get(doc, "network.feeder.kv", float),
        owf_tr_mva=_get(doc, "network.owf_tr.sn_mva", float),
        owf_tr_uk_percent=_get(doc, "network.owf_tr.uk_percent", float),
        cable_r_ohm_per_km=_get(doc, "network.cable.r_ohm_per_km", float),
        cable_x_ohm_per_km=_get(doc, "network.cable.x_ohm_per_km", float),
        cable_length_km=_get(doc, "network.cable.length_km", float),
        n_circuits=_get(doc, "network.cable.n_circuits", int, default=2),
    )
    if net.n_circuits not in (1, 2):
        raise ValidationError("network.cable.n_circuits", "must be 1 or 2")

    try:
        mmc = MmcSource(
            u_mmc_pos=_get(doc, "mmc.u_mmc_pos", float, default=1.0),
            i_lim=_get(doc, "mmc.i_lim", float, default=1.2),
        )
    except ValueError as exc:
        raise ValidationError("mmc", str(exc)) from exc

    kp = _get(doc, "pll.kp", float)
    ki = _get(doc, "pll.ki", float)
    f_hz = _get(doc, "pll.f_hz", float, default=50.0)
    if kp <= 0:
        raise ValidationError("pll.kp", "must be > 0")
    if ki <= 0:
        raise ValidationError("pll.ki", "must be > 0")
    if f_hz <= 0:
        raise ValidationError("pll.f_hz", "must be > 0")

    ft_raw = _get(doc, "fault.type", str)
    if ft_raw not in _FAULT_TYPES:
        raise ValidationError(
            "fault.type", f"unknown fault type {ft_raw!r}; one of {sorted(_FAULT_TYPES)}"
        )
    location = _get(doc, "fault.location", float, default=1.0)
    if not 0.0 <= location <= 1.0:
        raise ValidationError("fault.location", "must be in [0, 1]")
    z_eq = _get(doc, "fault.z_eq", (float, type(None)), default=None)
    if z_eq is not None and z_eq < 0:
        raise ValidationError("fault.z_eq", "must be >= 0")
    t_fault = _get(doc, "fault.t_fault", float)
    fct = _get(doc, "fault.fct", float)
    if t_fault < 0:
        raise ValidationError("fault.t_fault", "must be >= 0")
    if fct <= 0:
        raise ValidationError("fault.fct", "must be > 0")

    injection = CurrentInjection(
        isd=_get(doc, "injection.isd", float),
        isq=_get(doc, "injection.isq", float, default=0.0),
    )

    try:
        lvrt = LvrtPolicy(
            enabled=_get(doc, "lvrt.enabled", bool, default=False),
            v_enter=_get(doc, "lvrt.v_enter", float, default=0.9),
            v_exit=_get(doc, "lvrt.v_exit", float, default=0.92),
            hold=_get(doc, "lvrt.hold", float, default=0.02),
            i_max=_get(doc, "lvrt.i_max", float, default=1.2),
            k_q=_get(doc, "lvrt.k_q", float, default=1.5),
        )
    except ValueError as exc:
        raise ValidationError("lvrt", str(exc)) from exc

    dt = _get(doc, "sim.dt", float, default=5e-5)
    horizon = _get(doc, "sim.horizon", (float, type(None)), default=None)
    if dt <= 0:
        raise ValidationError("sim.dt", "must be > 0")
    if horizon is not None and horizon <= t_fault + fct:
        raise ValidationError("sim.horizon", "must exceed fault.t_fault + fault.fct")
    decimate = _get(doc, "output.decimate", int, default=1)
    if decimate < 1:
        raise ValidationError("output.decimate", "must be >= 1")

    return ScenarioConfig(
        name=name,
        base_mva=base_mva,
        base_kv=base_kv,
        network=net,
        mmc=mmc,
        pll_kp=kp,
        pll_ki=ki,
        f_hz=f_hz,
        fault_type=_FAULT_TYPES[ft_raw],
        fault_location=location,
        fault_z_eq=z_eq,
        t_fault=t_fault,
        fct=fct,
        injection=injection,
        lvrt=lvrt,
        dt=dt,
        horizon=horizon,
        decimate=decimate,
    )


def bundled_config_path(case_id: int) -> Path:
    """Path of a packaged study-case document (1..6)."""
    res = resources.files("tss_lab").joinpath(f"data/case{case_id}.json")
    return Path(str(res))


def load_bundled_config(case_id: int) -> ScenarioConfig:
    return parse_config(bundled_config_path(case_id))


def bundled_scenarios() -> dict[int, Scenario]:
    """The six packaged study cases as ready-to-run scenarios."""
    return {cid: load_bundled_config(cid).scenario() for cid in range(1, 7)}
