"""Equal-area criterion on the swing form of the loop, damping neglected.

On the torque-angle curve the fault-on interval accumulates the accelerating
area S_I between the mechanical-torque analog U0 and the sagged electrical
torque; after clearing, the decelerating area S_II is what remains between
the restored torque curve and U0 up to the critical angle. S_II >= S_I
predicts recovery on the first swing. The loop's damping is sign-indefinite,
so this is a first-swing approximation only; its clearing-time estimate
carries a known error band against simulation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

from .errors import AngleBeyondCritical, NoEquilibrium
from .model import (
    CurrentInjection,
    PllParams,
    StageParams,
    equilibria,
    swing_coefficients,
    voltage_offset,
)
from .simulate import Scenario, post_injection, steady_fault_injection, capped_dispatch

BISECT_TOL = 1e-10
BISECT_MAX_ITER = 200


class ClearingAngleStatus(enum.Enum):
    CRITICAL = "critical"          # proper interior solution
    NEVER_STABLE = "never_stable"  # accelerating area exceeds S_II already at delta0
    ALWAYS_STABLE = "always_stable"  # fault-on dynamics never advance the angle


@dataclass(frozen=True)
class ClearingAngle:
    status: ClearingAngleStatus
    delta_c: Optional[float] = None


@dataclass(frozen=True)
class EacReport:
    s_accel: float
    s_decel: float
    delta_clear: float
    delta_cr_post: float
    cct_eac: Optional[float]  # None: unbounded (angle never reaches delta_c)
    stable: bool              # S_II >= S_I at the actual clearing angle


def accel_area(
    fault_stage: StageParams,
    inj_fault: CurrentInjection,
    delta0: float,
    delta1: float,
) -> float:
    """Accelerating area S_I over [delta0, delta1] under the fault-on stage.

    Closed form of the integral of (U0_f - Ug_f*sin(delta)); clamped at zero
    for shallow faults where the integrand goes net negative.
    """
    if delta1 < delta0:
        raise ValueError(f"delta1 must be >= delta0, got {delta1} < {delta0}")
    u0 = voltage_offset(fault_stage, inj_fault)
    s = u0 * (delta1 - delta0) + fault_stage.ug * (math.cos(delta1) - math.cos(delta0))
    return max(s, 0.0)


def decel_area(
    post_stage: StageParams, inj_post: CurrentInjection, delta1: float
) -> float:
    """Decelerating area S_II from delta1 to the post-fault critical angle."""
    eq = equilibria(post_stage, inj_post)
    if eq is None:
        raise NoEquilibrium("post-fault stage admits no equilibrium")
    dcr = eq.uep.delta
    if delta1 > dcr:
        raise AngleBeyondCritical(
            f"clearing angle {delta1:.4f} beyond critical {dcr:.4f}"
        )
    u0 = voltage_offset(post_stage, inj_post)
    return (math.cos(delta1) - math.cos(dcr)) - u0 * (dcr - delta1)


def critical_clearing_angle(
    fault_stage: StageParams,
    post_stage: StageParams,
    inj_fault: CurrentInjection,
    inj_post: CurrentInjection,
    delta0: float,
) -> ClearingAngle:
    """Angle delta_c where S_I(delta0, delta_c) = S_II(delta_c), by bisection.

    The balance S_I - S_II is monotone in the clearing angle, so a sign
    change on [delta0, delta_cr] brackets the unique crossing.
    """
    eq = equilibria(post_stage, inj_post)
    if eq is None:
        raise NoEquilibrium("post-fault stage admits no equilibrium")
    dcr = eq.uep.delta

    # Fault-on dynamics that cannot advance the angle: boundary satisfied and
    # the fault-on equilibrium not ahead of the operating angle.
    eq_f = equilibria(fault_stage, inj_fault)
    if eq_f is not None and eq_f.sep.delta <= delta0 + 1e-12:
        return ClearingAngle(ClearingAngleStatus.ALWAYS_STABLE)

    def balance(dc: float) -> float:
        return accel_area(fault_stage, inj_fault, delta0, dc) - decel_area(
            post_stage, inj_post, dc
        )

    if delta0 >= dcr or balance(delta0) >= 0.0:
        return ClearingAngle(ClearingAngleStatus.NEVER_STABLE)
    if balance(dcr) <= 0.0:
        return ClearingAngle(ClearingAngleStatus.ALWAYS_STABLE)

    lo, hi = delta0, dcr
    for _ in range(BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if balance(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < BISECT_TOL:
            break
    return ClearingAngle(ClearingAngleStatus.CRITICAL, delta_c=0.5 * (lo + hi))


def swing_time_to_angle(
    fault_stage: StageParams,
    inj_fault: CurrentInjection,
    pll: PllParams,
    delta0: float,
    delta_target: float,
    dt: float = 1e-5,
    horizon: float = 2.0,
) -> Optional[float]:
    """Time for the undamped fault-on swing to travel from rest to a target angle.

    Integrates H*dw/dt = U0 - Ug*sin(delta) with the damping dropped (the
    equal-area idealization); RK4 with linear interpolation of the crossing.
    Returns None when the swing turns around or the horizon runs out before
    the target is reached.
    """
    coeff = swing_coefficients(fault_stage, inj_fault, pll)
    h, u0, ug = coeff.h_pll, coeff.t_m, coeff.ug
    if delta_target <= delta0:
        return 0.0

    def f(d: float, w: float) -> tuple[float, float]:
        return w, (u0 - ug * math.sin(d)) / h

    d, w = delta0, 0.0
    t = 0.0
    n = int(round(horizon / dt))
    for _ in range(n):
        k1d, k1w = f(d, w)
        k2d, k2w = f(d + 0.5 * dt * k1d, w + 0.5 * dt * k1w)
        k3d, k3w = f(d + 0.5 * dt * k2d, w + 0.5 * dt * k2w)
        k4d, k4w = f(d + dt * k3d, w + dt * k3w)
        d_new = d + dt / 6.0 * (k1d + 2 * k2d + 2 * k3d + k4d)
        w_new = w + dt / 6.0 * (k1w + 2 * k2w + 2 * k3w + k4w)
        if d_new >= delta_target:
            frac = (delta_target - d) / (d_new - d) if d_new > d else 1.0
            return t + frac * dt
        if w_new < 0.0 and d_new <= delta0:
            return None  # oscillating fault-on swing, target unreachable
        d, w, t = d_new, w_new, t + dt
    return None


def eac_cct(scenario: Scenario) -> Optional[float]:
    """Equal-area clearing-time estimate for a scenario; None when unbounded.

    Uses the settled fault-on injection (ride-through included) as a constant
    over the area integral, and the pre-fault stable equilibrium as the
    starting angle.
    """
    return eac_report(scenario, fct=scenario.fault.fct).cct_eac


def eac_report(scenario: Scenario, fct: Optional[float] = None) -> EacReport:
    """Full equal-area assessment of a scenario at a given clearing time."""
    pre, flt, post = scenario.stages()
    base = capped_dispatch(scenario.base_injection, scenario.lvrt)
    eq0 = equilibria(pre, base)
    if eq0 is None:
        raise NoEquilibrium("pre-fault stage admits no equilibrium")
    delta0 = eq0.sep.delta
    inj_f = steady_fault_injection(flt, scenario.base_injection, scenario.lvrt)
    inj_p = post_injection(post, scenario.base_injection, scenario.lvrt)
    eq_post = equilibria(post, inj_p)
    if eq_post is None:
        raise NoEquilibrium("post-fault stage admits no equilibrium")
    dcr = eq_post.uep.delta

    angle = critical_clearing_angle(flt, post, inj_f, inj_p, delta0)
    if angle.status is ClearingAngleStatus.ALWAYS_STABLE:
        cct: Optional[float] = math.inf
    elif angle.status is ClearingAngleStatus.NEVER_STABLE:
        cct = 0.0
    else:
        cct = swing_time_to_angle(flt, inj_f, scenario.pll, delta0, angle.delta_c)

    use_fct = scenario.fault.fct if fct is None else fct
    delta_clear = _undamped_angle_at(flt, inj_f, scenario.pll, delta0, use_fct)
    s1 = accel_area(flt, inj_f, delta0, delta_clear)
    if delta_clear > dcr:
        s2 = 0.0
        stable = False
    else:
        s2 = decel_area(post, inj_p, delta_clear)
        stable = s2 >= s1
    return EacReport(
        s_accel=s1,
        s_decel=s2,
        delta_clear=delta_clear,
        delta_cr_post=dcr,
        cct_eac=None if cct is not None and math.isinf(cct) else cct,
        stable=stable,
    )


def _undamped_angle_at(
    fault_stage: StageParams,
    inj_fault: CurrentInjection,
    pll: PllParams,
    delta0: float,
    t_target: float,
    dt: float = 1e-5,
) -> float:
    """Angle reached by the undamped fault-on swing after t_target seconds."""
    coeff = swing_coefficients(fault_stage, inj_fault, pll)
    h, u0, ug = coeff.h_pll, coeff.t_m, coeff.ug

    def f(d: float, w: float) -> tuple[float, float]:
        return w, (u0 - ug * math.sin(d)) / h

    n = max(int(round(t_target / dt)), 0)
    d, w = delta0, 0.0
    for _ in range(n):
        k1d, k1w = f(d, w)
        k2d, k2w = f(d + 0.5 * dt * k1d, w + 0.5 * dt * k1w)
        k3d, k3w = f(d + 0.5 * dt * k2d, w + 0.5 * dt * k2w)
        k4d, k4w = f(d + dt * k3d, w + dt * k3w)
        d += dt / 6.0 * (k1d + 2 * k2d + 2 * k3d + k4d)
        w += dt / 6.0 * (k1w + 2 * k2w + 2 * k3w + k4w)
    return d
