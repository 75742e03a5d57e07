"""Reduced-order electrical/PLL model of the aggregated converter behind a grid impedance.

The plant is a controlled current source (the aggregated wind-farm converter)
feeding a Thevenin voltage source ``Ug`` through ``Zg = Rg + jXg``. The only
dynamics are the two states of the synchronous-reference-frame PLL that tracks
the point-of-connection voltage angle:

    d(delta)/dt = [kp*(U0 - Ug*sin(delta)) + x_int] / (1 - kp*Xg*Isd/ws)
    d(x_int)/dt = [ki*(U0 - Ug*sin(delta)) + ki*(Xg*Isd/ws)*x_int] / (1 - kp*Xg*Isd/ws)

with the voltage offset ``U0 = Rg*Isq + Xg*Isd``. The same dynamics can be
written as a swing equation (inertia/torque analogy), which drives the
equal-area and Lyapunov analyses in the sibling modules.

Angles are radians, frequencies rad/s, electrical quantities per-unit on one
system base. ``delta`` is never wrapped: pole slips must stay observable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .errors import SingularDenominator

OMEGA_S_DEFAULT = 100.0 * math.pi  # 50 Hz system

# Guard on the loop denominator 1 - kp*Xg*Isd/ws. Realistic parameter sets sit
# near 1 (about 0.975 for the reference case); anything at or below the guard
# is treated as an invalid scenario rather than integrated through.
EPS_SING = 0.05


@dataclass(frozen=True)
class PllParams:
    """SRF-PLL proportional/integral gains and the synchronous frequency."""

    kp: float
    ki: float
    omega_s: float = OMEGA_S_DEFAULT

    def __post_init__(self):
        if not self.kp > 0:
            raise ValueError(f"kp must be > 0, got {self.kp}")
        if not self.ki > 0:
            raise ValueError(f"ki must be > 0, got {self.ki}")
        if not self.omega_s > 0:
            raise ValueError(f"omega_s must be > 0, got {self.omega_s}")


@dataclass(frozen=True)
class StageParams:
    """Piecewise-constant electrical environment for one fault-sequence stage."""

    ug: float  # source voltage magnitude, p.u.
    rg: float  # grid resistance, p.u.
    xg: float  # grid reactance at synchronous frequency, p.u.

    def __post_init__(self):
        if self.ug < 0:
            raise ValueError(f"ug must be >= 0, got {self.ug}")
        if self.rg < 0:
            raise ValueError(f"rg must be >= 0, got {self.rg}")
        if not self.xg > 0:
            raise ValueError(f"xg must be > 0, got {self.xg}")


@dataclass(frozen=True)
class CurrentInjection:
    """Converter dq current references in the PLL frame, p.u."""

    isd: float
    isq: float

    def magnitude(self) -> float:
        return math.hypot(self.isd, self.isq)


ZERO_INJECTION = CurrentInjection(0.0, 0.0)


@dataclass(frozen=True)
class PllState:
    """The two dynamic states: angle difference delta and integrator x_int."""

    delta: float  # rad, unwrapped
    x_int: float  # rad/s

    def __post_init__(self):
        if not (math.isfinite(self.delta) and math.isfinite(self.x_int)):
            raise ValueError(f"state must be finite, got ({self.delta}, {self.x_int})")


@dataclass(frozen=True)
class SwingCoefficients:
    """Swing-equation view of the loop: H*dw/dt = Tm - Ug*sin(delta) - D(delta)*w."""

    t_m: float    # mechanical-torque analog, = U0
    ug: float     # electrical-torque amplitude
    h_pll: float  # inertia analog, (1 - kp*Xg*Isd/ws)/ki
    kp: float
    ki: float
    xg_isd_over_ws: float

    def damping(self, delta: float) -> float:
        """Angle-dependent damping D(delta) = kp*Ug*cos(delta)/ki - Xg*Isd/ws.

        Sign-indefinite: negative around the unstable equilibrium, so the
        swing analogy must not assume positive damping.
        """
        return self.kp * self.ug * math.cos(delta) / self.ki - self.xg_isd_over_ws


@dataclass(frozen=True)
class EquilibriumPair:
    """Stable (sep) and unstable (uep) equilibria of one stage."""

    sep: PllState
    uep: PllState


@dataclass(frozen=True)
class BoundaryCheck:
    """Result of the current-injection boundary test |U0| < Ug."""

    satisfied: bool
    margin: float            # Ug - |U0|, p.u.
    reduced_satisfied: bool  # resistance-free check |Xg*Isd| < Ug


def voltage_offset(stage: StageParams, inj: CurrentInjection) -> float:
    """Voltage offset U0 = Rg*Isq + Xg*Isd, the constant forcing of the loop."""
    return stage.rg * inj.isq + stage.xg * inj.isd


def poc_voltage_q(
    state: PllState,
    stage: StageParams,
    inj: CurrentInjection,
    pll: PllParams,
    omega_pll: float,
) -> float:
    """q-axis point-of-connection voltage seen by the PLL.

    Usq = -Ug*sin(delta) + Rg*Isq + (w_pll/ws)*Xg*Isd. The reactance term
    scales with the instantaneous PLL frequency.
    """
    return (
        -stage.ug * math.sin(state.delta)
        + stage.rg * inj.isq
        + (omega_pll / pll.omega_s) * stage.xg * inj.isd
    )


def poc_voltage_magnitude(
    state: PllState, stage: StageParams, inj: CurrentInjection
) -> float:
    """|Us| = |Ug*e^{-j*delta} + (Rg + jXg)*(Isd + jIsq)| in the PLL frame.

    Evaluated at synchronous frequency (w_pll/ws = 1): this magnitude only
    feeds the ride-through threshold, where the frequency-dependent part of
    the reactance is second order.
    """
    re = stage.ug * math.cos(state.delta) + stage.rg * inj.isd - stage.xg * inj.isq
    im = -stage.ug * math.sin(state.delta) + stage.rg * inj.isq + stage.xg * inj.isd
    return math.hypot(re, im)


def loop_denominator(stage: StageParams, inj: CurrentInjection, pll: PllParams) -> float:
    """1 - kp*Xg*Isd/ws with the singularity guard applied."""
    den = 1.0 - pll.kp * stage.xg * inj.isd / pll.omega_s
    if den < EPS_SING:
        raise SingularDenominator(den, EPS_SING)
    return den


def pll_rhs(
    state: PllState, stage: StageParams, inj: CurrentInjection, pll: PllParams
) -> tuple[float, float]:
    """Right-hand side (d delta/dt, d x_int/dt) of the explicit loop dynamics."""
    den = loop_denominator(stage, inj, pll)
    return _rhs_unchecked(
        state.delta,
        state.x_int,
        stage.ug,
        voltage_offset(stage, inj),
        stage.xg * inj.isd / pll.omega_s,
        pll.kp,
        pll.ki,
        den,
    )


def _rhs_unchecked(
    delta: float,
    x_int: float,
    ug: float,
    u0: float,
    xg_isd_over_ws: float,
    kp: float,
    ki: float,
    den: float,
) -> tuple[float, float]:
    # Hot path for the integrator: plain floats, guard already checked.
    forcing = u0 - ug * math.sin(delta)
    return (
        (kp * forcing + x_int) / den,
        (ki * forcing + ki * xg_isd_over_ws * x_int) / den,
    )


def swing_coefficients(
    stage: StageParams, inj: CurrentInjection, pll: PllParams
) -> SwingCoefficients:
    """Coefficients of the equivalent swing equation for this stage."""
    den = loop_denominator(stage, inj, pll)
    return SwingCoefficients(
        t_m=voltage_offset(stage, inj),
        ug=stage.ug,
        h_pll=den / pll.ki,
        kp=pll.kp,
        ki=pll.ki,
        xg_isd_over_ws=stage.xg * inj.isd / pll.omega_s,
    )


def injection_boundary(stage: StageParams, inj: CurrentInjection) -> BoundaryCheck:
    """Existence condition for a loop equilibrium: |Rg*Isq + Xg*Isd| < Ug."""
    u0 = voltage_offset(stage, inj)
    return BoundaryCheck(
        satisfied=abs(u0) < stage.ug,
        margin=stage.ug - abs(u0),
        reduced_satisfied=abs(stage.xg * inj.isd) < stage.ug,
    )


def equilibria(stage: StageParams, inj: CurrentInjection) -> Optional[EquilibriumPair]:
    """Both equilibria of the stage, or None when |U0/Ug| >= 1.

    The stable point sits at delta_s = asin(m); the unstable companion at
    pi - delta_s for m >= 0 and -pi - delta_s for m < 0.
    """
    u0 = voltage_offset(stage, inj)
    if stage.ug <= 0 or abs(u0) >= stage.ug:
        return None
    m = u0 / stage.ug
    delta_s = math.asin(m)
    delta_u = math.pi - delta_s if m >= 0 else -math.pi - delta_s
    return EquilibriumPair(sep=PllState(delta_s, 0.0), uep=PllState(delta_u, 0.0))
