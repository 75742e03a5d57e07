"""Energy function and normalized stability margin for the post-fault loop.

With the substitutions

    gamma = kp*sqrt(Ug)/sqrt(ki),  h = Xg*Isd*sqrt(ki)/(ws*sqrt(Ug)),
    m = U0/Ug,                     x = x_int/sqrt(ki*Ug),

the loop admits the local energy function

    V(delta, x) = V0 + (1/2)*[x - h*(delta - delta_s)]**2
                  - (1 - gamma*h)*(m*delta + cos(delta)),

which for h ~ 0 (post-fault parameters keep Xg*Isd*sqrt(ki) well below ws)
reduces to

    V(delta, x) = (1/2)*x**2 - (m*delta + cos(delta)) + (m*delta_s + cos(delta_s)).

Sublevel sets of the critical value V_cr (the reduced V at the unstable
equilibrium) that stay inside the angle window [-pi - delta_s, pi - delta_s]
are invariant and attracted to the stable equilibrium, so

    zeta = 1 - V/V_cr

is a certified (conservative) resynchronization margin: zeta > 0 inside the
window guarantees recovery; zeta <= 0 is inconclusive.

The dynamics are 2*pi-periodic in the angle, so the same certificate applies
around every shifted equilibrium delta_s + 2*pi*k. The index is therefore
evaluated with the angle folded to its nearest equilibrium: a loop that
re-locks after one or more pole slips reads zeta -> 1 just like an unslipped
one, matching what a modulo-2*pi angle estimator would report. The raw
(unfolded) evaluation remains available via ``fold=False``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import NoEquilibrium
from .model import CurrentInjection, PllParams, PllState, StageParams, voltage_offset
from .simulate import Trajectory


class LfMode(enum.Enum):
    REDUCED = "reduced"
    FULL = "full"


@dataclass(frozen=True)
class LyapunovParams:
    """Derived quantities parameterizing the energy function and the index."""

    gamma: float
    h: float
    m: float
    delta_s: float
    delta_cr: float
    v_cr: float
    mode: LfMode = LfMode.REDUCED

    def __post_init__(self):
        if not abs(self.m) < 1:
            raise NoEquilibrium(f"|m| must be < 1, got {self.m}")
        if not self.v_cr > 0:
            raise ValueError(f"v_cr must be > 0, got {self.v_cr}")
        if self.mode is LfMode.FULL and not 1.0 - self.gamma * self.h > 0:
            raise ValueError("full mode requires 1 - gamma*h > 0")

    @property
    def window(self) -> tuple[float, float]:
        """Angle window of the certificate."""
        return (-math.pi - self.delta_s, math.pi - self.delta_s)


@dataclass(frozen=True)
class NormalizedState:
    """State in index coordinates: angle and x = x_int/sqrt(ki*Ug)."""

    delta: float
    x: float


@dataclass(frozen=True)
class IndexPoint:
    zeta: float
    in_domain: bool
    basin: int = 0  # 2*pi multiples folded out of the angle


def lf_params(
    stage: StageParams,
    inj: CurrentInjection,
    pll: PllParams,
    mode: LfMode = LfMode.REDUCED,
) -> LyapunovParams:
    """Energy-function parameters for a stage; post-fault values in normal use.

    Raises NoEquilibrium when |U0| >= Ug (the index is undefined; callers
    fall back to simulation verdicts).
    """
    if stage.ug <= 0:
        raise NoEquilibrium(f"Ug must be > 0 for the index, got {stage.ug}")
    m = voltage_offset(stage, inj) / stage.ug
    if not abs(m) < 1:
        raise NoEquilibrium(f"|U0/Ug| = {abs(m):.4f} >= 1, no equilibrium")
    delta_s = math.asin(m)
    delta_cr = math.pi - delta_s if m >= 0 else -math.pi - delta_s
    v_cr = (m * delta_s + math.cos(delta_s)) - (m * delta_cr + math.cos(delta_cr))
    return LyapunovParams(
        gamma=pll.kp * math.sqrt(stage.ug) / math.sqrt(pll.ki),
        h=stage.xg * inj.isd * math.sqrt(pll.ki) / (pll.omega_s * math.sqrt(stage.ug)),
        m=m,
        delta_s=delta_s,
        delta_cr=delta_cr,
        v_cr=v_cr,
        mode=mode,
    )


def normalize(state: PllState, ki: float, ug: float) -> NormalizedState:
    return NormalizedState(delta=state.delta, x=state.x_int / math.sqrt(ki * ug))


def lf_value(state: PllState, p: LyapunovParams, ki: float, ug: float) -> float:
    """Energy V at a state, in the parameterization's own mode. No folding."""
    x = state.x_int / math.sqrt(ki * ug)
    d = state.delta
    potential = p.m * d + math.cos(d)
    anchor = p.m * p.delta_s + math.cos(p.delta_s)
    if p.mode is LfMode.REDUCED:
        return 0.5 * x * x - potential + anchor
    one_gh = 1.0 - p.gamma * p.h
    v0 = one_gh * anchor
    return v0 + 0.5 * (x - p.h * (d - p.delta_s)) ** 2 - one_gh * potential


def stability_index(
    state: PllState,
    p: LyapunovParams,
    ki: float,
    ug: float,
    fold: bool = True,
) -> IndexPoint:
    """zeta = 1 - V/V_cr with the angle folded to its nearest equilibrium.

    ``in_domain`` reports whether the (folded) angle lies in the certificate
    window; zeta > 0 with in_domain certifies resynchronization, zeta <= 0 is
    inconclusive (the index is conservative).
    """
    basin = 0
    delta = state.delta
    if fold:
        basin = int(round((delta - p.delta_s) / (2.0 * math.pi)))
        delta = delta - 2.0 * math.pi * basin
    folded = PllState(delta, state.x_int)
    v = lf_value(folded, p, ki, ug)
    lo, hi = p.window
    return IndexPoint(
        zeta=1.0 - v / p.v_cr,
        in_domain=lo <= delta <= hi,
        basin=basin,
    )


def index_series(
    traj: Trajectory,
    post_stage: StageParams,
    post_inj: CurrentInjection,
    pll: PllParams,
    mode: LfMode = LfMode.REDUCED,
    fold: bool = True,
) -> Trajectory:
    """Fill the trajectory's zeta/in_domain columns against post-fault parameters.

    Every sample is evaluated with the same (post-fault) parameters,
    including fault-on samples: the index is predictive, asking whether the
    present state already lies in the post-fault basin.
    """
    p = lf_params(post_stage, post_inj, pll, mode)
    zeta, in_dom = index_arrays(traj.delta, traj.x_int, p, pll.ki, post_stage.ug, fold=fold)
    traj.zeta = zeta
    traj.in_domain = in_dom
    return traj


def index_arrays(
    delta: np.ndarray,
    x_int: np.ndarray,
    p: LyapunovParams,
    ki: float,
    ug: float,
    fold: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized zeta and in_domain over state arrays (reduced or full mode)."""
    d = np.asarray(delta, dtype=float)
    x = np.asarray(x_int, dtype=float) / math.sqrt(ki * ug)
    if fold:
        d = d - 2.0 * math.pi * np.round((d - p.delta_s) / (2.0 * math.pi))
    anchor = p.m * p.delta_s + math.cos(p.delta_s)
    potential = p.m * d + np.cos(d)
    if p.mode is LfMode.REDUCED:
        v = 0.5 * x * x - potential + anchor
    else:
        one_gh = 1.0 - p.gamma * p.h
        v = one_gh * anchor + 0.5 * (x - p.h * (d - p.delta_s)) ** 2 - one_gh * potential
    lo, hi = p.window
    return 1.0 - v / p.v_cr, (d >= lo) & (d <= hi)
