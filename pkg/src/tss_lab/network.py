"""Per-unit network aggregation and staged fault parameters.

The grid impedance between the aggregated converter and the MMC-formed
voltage source has four parts: converter transformer leakage, aggregated
feeder cable, plant transformer leakage, and the double-circuit sending
cable to the MMC station. A short-circuit fault on one sending-cable
circuit splits that chain at the fault point; the positive-sequence
residual voltage there is set by a divider against an equivalent
negative/zero-sequence impedance ``z_eq``, capped by the MMC current limit.

Shunt admittances are discarded throughout (short cable runs, inductance
dominated). All impedances are per-unit on one system base.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

from .errors import NonPositiveBase
from .model import StageParams


class FaultType(enum.Enum):
    SINGLE_PHASE_GROUND = "single_phase_ground"
    INTERPHASE = "interphase"
    TWO_PHASE_GROUND = "two_phase_ground"
    THREE_PHASE_GROUND = "three_phase_ground"


# Positive-sequence residual voltage targets at the MMC station bus, used to
# calibrate z_eq presets per fault type. Grounded multi-phase faults collapse
# the voltage almost completely; single-phase and interphase faults leave a
# substantial residual because the negative/zero-sequence path is weak.
FAULT_VOLTAGE_TARGETS = {
    FaultType.SINGLE_PHASE_GROUND: 0.57,
    FaultType.INTERPHASE: 0.50,
    FaultType.TWO_PHASE_GROUND: 0.015,
    FaultType.THREE_PHASE_GROUND: 0.0,
}


@dataclass(frozen=True)
class NetworkSegments:
    """Per-unit impedances of the four chain segments.

    Transformer leakages are taken as pure reactance; cables carry R + jX.
    ``z_cable_single`` is one circuit of the sending cable.
    """

    z_wtg_tr: float
    z_feeder: complex
    z_owf_tr: float
    z_cable_single: complex
    n_circuits: int = 2

    def __post_init__(self):
        for name in ("z_wtg_tr", "z_owf_tr"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("z_feeder", "z_cable_single"):
            z = getattr(self, name)
            if z.real < 0 or z.imag < 0:
                raise ValueError(f"{name} must have non-negative R and X")
        if self.n_circuits not in (1, 2):
            raise ValueError(f"n_circuits must be 1 or 2, got {self.n_circuits}")

    def chain_to_owf_bus(self) -> complex:
        """Everything between the converter and the sending-cable bus."""
        return 1j * self.z_wtg_tr + self.z_feeder + 1j * self.z_owf_tr


@dataclass(frozen=True)
class FaultSpec:
    """One short-circuit event on the sending cable.

    ``location`` runs along the faulted circuit from the plant end (0) to the
    MMC station (1). ``z_eq`` is the equivalent negative/zero-sequence
    impedance magnitude; None selects the calibrated per-fault-type preset.
    """

    fault_type: FaultType
    location: float = 1.0
    z_eq: Optional[float] = None
    t_fault: float = 0.1
    fct: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.location <= 1.0:
            raise ValueError(f"location must be in [0, 1], got {self.location}")
        if self.z_eq is not None and self.z_eq < 0:
            raise ValueError(f"z_eq must be >= 0, got {self.z_eq}")
        if not self.fct > 0:
            raise ValueError(f"fct must be > 0, got {self.fct}")
        if self.t_fault < 0:
            raise ValueError(f"t_fault must be >= 0, got {self.t_fault}")


@dataclass(frozen=True)
class MmcSource:
    """MMC station abstracted as a magnitude-capped, current-limited source."""

    u_mmc_pos: float = 1.0
    i_lim: float = 1.2

    def __post_init__(self):
        if not 0.0 <= self.u_mmc_pos <= 1.1:
            raise ValueError(f"u_mmc_pos must be in [0, 1.1], got {self.u_mmc_pos}")
        if not self.i_lim > 0:
            raise ValueError(f"i_lim must be > 0, got {self.i_lim}")


@dataclass(frozen=True)
class PhysicalNetwork:
    """Nameplate/ohmic description of the chain, before per-unit conversion."""

    wtg_tr_unit_mva: float      # one converter transformer
    wtg_tr_uk_percent: float
    n_wtg: int                  # aggregated units in parallel
    feeder_r_ohm: float
    feeder_x_ohm: float
    feeder_kv: float
    owf_tr_mva: float
    owf_tr_uk_percent: float
    cable_r_ohm_per_km: float
    cable_x_ohm_per_km: float
    cable_length_km: float
    n_circuits: int = 2


def rebase_transformer(uk_percent: float, nameplate_mva: float, base_mva: float) -> float:
    """Nameplate leakage (uk%) to per-unit on the system base."""
    if nameplate_mva <= 0 or base_mva <= 0:
        raise NonPositiveBase(f"MVA values must be positive, got {nameplate_mva}, {base_mva}")
    return uk_percent / 100.0 * base_mva / nameplate_mva


def ohm_to_pu(z_ohm: complex, kv: float, base_mva: float) -> complex:
    """Ohmic impedance to per-unit at the given voltage level."""
    if kv <= 0 or base_mva <= 0:
        raise NonPositiveBase(f"bases must be positive, got {kv} kV, {base_mva} MVA")
    return z_ohm / (kv * kv / base_mva)


def per_unit_network(
    physical: PhysicalNetwork, base_mva: float, base_kv: float
) -> NetworkSegments:
    """Convert a physical network record to per-unit segments.

    Transformers rebase from nameplate MVA; the aggregated converter
    transformer is ``n_wtg`` nameplate units in parallel. Cables convert at
    their own voltage level (``base_kv`` for the sending cable).
    """
    if base_mva <= 0 or base_kv <= 0:
        raise NonPositiveBase(f"bases must be positive, got {base_mva} MVA, {base_kv} kV")
    z_wtg = rebase_transformer(
        physical.wtg_tr_uk_percent,
        physical.wtg_tr_unit_mva * physical.n_wtg,
        base_mva,
    )
    z_feeder = ohm_to_pu(
        complex(physical.feeder_r_ohm, physical.feeder_x_ohm),
        physical.feeder_kv,
        base_mva,
    )
    z_owf = rebase_transformer(physical.owf_tr_uk_percent, physical.owf_tr_mva, base_mva)
    z_cable = ohm_to_pu(
        complex(physical.cable_r_ohm_per_km, physical.cable_x_ohm_per_km)
        * physical.cable_length_km,
        base_kv,
        base_mva,
    )
    return NetworkSegments(
        z_wtg_tr=z_wtg,
        z_feeder=z_feeder,
        z_owf_tr=z_owf,
        z_cable_single=z_cable,
        n_circuits=physical.n_circuits,
    )


def zeq_preset(fault_type: FaultType, mmc: MmcSource) -> float:
    """Equivalent sequence impedance calibrated to the residual-voltage target.

    Inverts the current-limited divider at location = 1 (fault at the MMC
    bus), where the clamp is active and the residual is i_lim * z_eq.
    """
    return FAULT_VOLTAGE_TARGETS[fault_type] / mmc.i_lim


def resolve_zeq(fault: FaultSpec, mmc: MmcSource) -> float:
    return fault.z_eq if fault.z_eq is not None else zeq_preset(fault.fault_type, mmc)


def prefault_stage(net: NetworkSegments, mmc: MmcSource) -> StageParams:
    """Normal operation: rated source voltage behind the full parallel chain."""
    z = net.chain_to_owf_bus() + net.z_cable_single / net.n_circuits
    return StageParams(ug=mmc.u_mmc_pos, rg=z.real, xg=z.imag)


def fault_stage(net: NetworkSegments, mmc: MmcSource, fault: FaultSpec) -> StageParams:
    """Fault-on stage: residual voltage at the fault point behind the converter-side chain.

    The converter-side impedance is the chain plus the faulted-circuit stub up
    to the fault point. The MMC-side stub (1 - location) of the faulted
    circuit sits between the source and the fault; the healthy parallel
    circuit is neglected during the fault (severe faults collapse the common
    bus, leaving a single series path).

    The unconstrained residual is the divider u_mmc * z_eq / |z_mmc + z_eq|;
    when the implied source current exceeds the MMC limit, the residual is
    clamped to i_lim * z_eq.
    """
    z_eq = resolve_zeq(fault, mmc)
    z_wtg_side = net.chain_to_owf_bus() + fault.location * net.z_cable_single
    z_mmc_side = abs((1.0 - fault.location) * net.z_cable_single)
    implied_current = mmc.u_mmc_pos / max(z_mmc_side + z_eq, 1e-12)
    if implied_current > mmc.i_lim:
        uf = mmc.i_lim * z_eq
    else:
        uf = mmc.u_mmc_pos * z_eq / (z_mmc_side + z_eq)
    return StageParams(ug=uf, rg=z_wtg_side.real, xg=z_wtg_side.imag)


def postfault_stage(net: NetworkSegments, fault: FaultSpec) -> StageParams:
    """After clearing: source restored, faulted circuit removed from service."""
    if net.n_circuits != 2:
        raise ValueError("post-fault topology requires a double-circuit sending cable")
    z = net.chain_to_owf_bus() + net.z_cable_single
    return StageParams(ug=1.0, rg=z.real, xg=z.imag)


def reference_network() -> PhysicalNetwork:
    """Reference plant data: 100 x 4 MW units, 12 km double-circuit export."""
    return PhysicalNetwork(
        wtg_tr_unit_mva=4.5,
        wtg_tr_uk_percent=7.0,
        n_wtg=100,
        feeder_r_ohm=0.038,
        feeder_x_ohm=0.06,
        feeder_kv=35.0,
        owf_tr_mva=480.0,
        owf_tr_uk_percent=10.5,
        cable_r_ohm_per_km=0.02,
        cable_x_ohm_per_km=0.4,
        cable_length_km=12.0,
        n_circuits=2,
    )
