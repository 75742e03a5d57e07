"""Machine-readable outputs: trajectory/map CSV and summary JSON.

All writers are deterministic: fixed column order, 9 significant digits,
sorted JSON keys, no timestamps. Repeat runs of the same configuration
produce byte-identical files.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

from .analysis import RoaMap
from .simulate import STAGE_LABELS, Trajectory

TRAJECTORY_COLUMNS = (
    "t", "delta", "x_int", "omega_pll", "usq", "us_mag",
    "isd", "isq", "stage", "zeta", "in_domain",
)


def _fmt(value: float) -> str:
    if math.isnan(value):
        return "nan"
    return f"{value:.9g}"


def write_trajectory_csv(traj: Trajectory, path: Path, decimate: int = 1) -> None:
    """Fixed-order CSV of the run; ``decimate`` keeps every n-th sample.

    Stage-boundary and final samples are always kept so the stage column
    still switches exactly at the event times.
    """
    if decimate < 1:
        raise ValueError("decimate must be >= 1")
    keep = set(range(0, traj.n_samples, decimate))
    keep.update((traj.i_fault, traj.i_clear, traj.n_samples - 1))
    path = Path(path)
    with path.open("w", newline="") as f:
        f.write(",".join(TRAJECTORY_COLUMNS) + "\n")
        for i in sorted(keep):
            row = (
                _fmt(traj.t[i]),
                _fmt(traj.delta[i]),
                _fmt(traj.x_int[i]),
                _fmt(traj.omega_pll[i]),
                _fmt(traj.usq[i]),
                _fmt(traj.us_mag[i]),
                _fmt(traj.isd[i]),
                _fmt(traj.isq[i]),
                STAGE_LABELS[traj.stage[i]],
                _fmt(traj.zeta[i]),
                str(int(traj.in_domain[i])),
            )
            f.write(",".join(row) + "\n")


def write_roa_csv(roa: RoaMap, path: Path) -> None:
    """Grid map as rows of (delta, x, zeta, fate)."""
    path = Path(path)
    with path.open("w", newline="") as f:
        f.write("delta,x,zeta,fate\n")
        for i, d in enumerate(roa.delta):
            for j, x in enumerate(roa.x):
                fate = "converged" if roa.converged[i, j] else "diverged"
                f.write(f"{_fmt(d)},{_fmt(x)},{_fmt(roa.zeta[i, j])},{fate}\n")


def write_json(payload: dict[str, Any], path: Path) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def stage_dict(stage) -> dict[str, float]:
    return {"ug": stage.ug, "rg": stage.rg, "xg": stage.xg}
