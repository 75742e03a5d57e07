"""Staged fault-sequence simulation of the PLL loop with ride-through switching.

A scenario is pre-fault / fault-on / post-fault, each a constant
:class:`~tss_lab.model.StageParams`, integrated with classical RK4 at a fixed
step. Current references switch with the low-voltage ride-through (LVRT)
state machine; the voltage it acts on is the previous step's |Us| (one-step
measurement delay breaks the algebraic loop between injection and voltage).

The verdict logic treats the PLL as resynchronized when it locks onto *any*
2*pi-shifted stable equilibrium of the post-fault stage: the loop tracks an
angle on the circle, so re-locking one or more pole slips later is a
physical recovery. Loss of synchronization means the angle keeps slipping
(or escapes past the unstable equilibrium) without ever re-locking.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NoPrefaultEquilibrium
from .model import (
    CurrentInjection,
    PllParams,
    PllState,
    StageParams,
    equilibria,
    loop_denominator,
    poc_voltage_magnitude,
    voltage_offset,
    _rhs_unchecked,
)
from .network import FaultSpec, MmcSource, NetworkSegments, fault_stage, postfault_stage, prefault_stage

STAGE_PREFAULT, STAGE_FAULT, STAGE_POSTFAULT = 0, 1, 2
STAGE_LABELS = ("prefault", "fault", "postfault")

# Lock window for resynchronization: distance to the nearest shifted SEP and
# loop frequency error, held continuously for LOCK_DWELL seconds.
LOCK_DELTA_TOL = 0.01      # rad
LOCK_SPEED_TOL = 0.1       # rad/s
LOCK_DWELL = 0.1           # s


@dataclass(frozen=True)
class LvrtPolicy:
    """Reactive-current ride-through rule with exit hysteresis.

    Below ``v_enter`` the q-axis reference follows -k_q*(v_enter - |Us|)
    (clamped to the current cap); the d axis keeps whatever headroom remains
    (q priority). The mode exits only after |Us| stays above ``v_exit`` for
    ``hold`` seconds, preventing chattering right after fault clearance.
    """

    enabled: bool = False
    v_enter: float = 0.9
    v_exit: float = 0.92
    hold: float = 0.02
    i_max: float = 1.2
    k_q: float = 1.5

    def __post_init__(self):
        if self.v_exit < self.v_enter:
            raise ValueError("v_exit must be >= v_enter")
        if not self.i_max > 0:
            raise ValueError("i_max must be > 0")


@dataclass(frozen=True)
class Scenario:
    """Everything needed for one staged run."""

    pll: PllParams
    net: NetworkSegments
    mmc: MmcSource
    fault: FaultSpec
    base_injection: CurrentInjection
    lvrt: LvrtPolicy = LvrtPolicy()
    dt: float = 5e-5
    horizon: Optional[float] = None  # None: t_fault + fct + 1.0 s

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.horizon is not None and self.horizon <= self.fault.t_fault + self.fault.fct:
            raise ValueError("horizon must exceed t_fault + fct")

    def effective_horizon(self) -> float:
        if self.horizon is not None:
            return self.horizon
        return self.fault.t_fault + self.fault.fct + 1.0

    def stages(self) -> tuple[StageParams, StageParams, StageParams]:
        return (
            prefault_stage(self.net, self.mmc),
            fault_stage(self.net, self.mmc, self.fault),
            postfault_stage(self.net, self.fault),
        )


@dataclass
class Trajectory:
    """Fixed-step time series of one run; the unit of all downstream analysis."""

    t: np.ndarray
    delta: np.ndarray
    x_int: np.ndarray
    omega_pll: np.ndarray
    usq: np.ndarray
    us_mag: np.ndarray
    isd: np.ndarray
    isq: np.ndarray
    stage: np.ndarray            # int codes, see STAGE_LABELS
    zeta: np.ndarray             # filled by the stability index, NaN until then
    in_domain: np.ndarray        # bool companion of zeta
    omega_s: float
    ki: float
    dt: float
    i_fault: int
    i_clear: int

    @property
    def n_samples(self) -> int:
        return self.t.shape[0]

    @property
    def t_clear(self) -> float:
        return self.t[self.i_clear]

    def stage_labels(self) -> list[str]:
        return [STAGE_LABELS[s] for s in self.stage]


class VerdictKind(enum.Enum):
    RESYNCHRONIZED = "resynchronized"
    LOSS_OF_SYNCHRONIZATION = "loss_of_synchronization"
    MARGINAL = "marginal"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    settle_time: Optional[float] = None      # absolute, resynchronized only
    first_slip_time: Optional[float] = None  # absolute, first outward UEP crossing
    basin: Optional[int] = None              # 2*pi multiples from the principal SEP

    @property
    def stable(self) -> bool:
        return self.kind is VerdictKind.RESYNCHRONIZED


def lvrt_currents(
    us_mag: float, base: CurrentInjection, policy: LvrtPolicy
) -> CurrentInjection:
    """Current references while ride-through is active, q axis first."""
    isq = -policy.k_q * (policy.v_enter - us_mag)
    isq = min(0.0, max(-policy.i_max, isq))
    headroom = math.sqrt(max(policy.i_max**2 - isq**2, 0.0))
    return CurrentInjection(isd=min(base.isd, headroom), isq=isq)


def capped_dispatch(base: CurrentInjection, policy: LvrtPolicy) -> CurrentInjection:
    """Dispatch currents with the d axis held under the converter cap.

    Applies even with ride-through disabled: the current source stays
    bounded regardless of control mode."""
    return CurrentInjection(isd=min(base.isd, policy.i_max), isq=base.isq)


def steady_fault_injection(
    stage: StageParams, base: CurrentInjection, policy: LvrtPolicy, iterations: int = 200
) -> CurrentInjection:
    """Fixed point of the injection/|Us| loop on a constant stage.

    This is the settled fault-on current once the ride-through rule and the
    voltage it measures agree; single-run transients converge here within a
    few measurement delays.
    """
    inj = capped_dispatch(base, policy)
    if not policy.enabled:
        return inj
    state = PllState(0.0, 0.0)
    for _ in range(iterations):
        us = poc_voltage_magnitude(state, stage, inj)
        new = lvrt_currents(us, base, policy) if us < policy.v_enter else capped_dispatch(base, policy)
        if abs(new.isd - inj.isd) < 1e-12 and abs(new.isq - inj.isq) < 1e-12:
            return new
        inj = new
    return inj


def post_injection(
    post_stage: StageParams, base: CurrentInjection, policy: LvrtPolicy
) -> CurrentInjection:
    """Steady injection of the post-fault stage (dispatch, or LVRT if the
    recovered voltage still sits below the entry threshold)."""
    inj = capped_dispatch(base, policy)
    eq = equilibria(post_stage, inj)
    angle = eq.sep.delta if eq is not None else 0.0
    us = poc_voltage_magnitude(PllState(angle, 0.0), post_stage, inj)
    if policy.enabled and us < policy.v_enter:
        return lvrt_currents(us, base, policy)
    return inj


def run(scenario: Scenario) -> Trajectory:
    """Integrate the staged scenario; deterministic for identical inputs."""
    pll = scenario.pll
    dt = scenario.dt
    pre, flt, post = scenario.stages()
    base = capped_dispatch(scenario.base_injection, scenario.lvrt)

    # The guard is monotone in isd, so checking each stage at the capped
    # dispatch current covers every injection the run can produce.
    for stg in (pre, flt, post):
        loop_denominator(stg, base, pll)

    eq0 = equilibria(pre, base)
    if eq0 is None:
        raise NoPrefaultEquilibrium(
            f"pre-fault stage violates the injection boundary "
            f"(|U0|={abs(voltage_offset(pre, base)):.4f} >= Ug={pre.ug:.4f})"
        )

    horizon = scenario.effective_horizon()
    n_steps = int(round(horizon / dt))
    i_fault = min(int(round(scenario.fault.t_fault / dt)), n_steps)
    i_clear = min(int(round((scenario.fault.t_fault + scenario.fault.fct) / dt)), n_steps)

    n = n_steps + 1
    out_t = np.empty(n)
    out_delta = np.empty(n)
    out_x = np.empty(n)
    out_w = np.empty(n)
    out_usq = np.empty(n)
    out_us = np.empty(n)
    out_isd = np.empty(n)
    out_isq = np.empty(n)
    out_stage = np.empty(n, dtype=np.int8)

    delta, x_int = eq0.sep.delta, eq0.sep.x_int
    lv_active = False
    exit_since: Optional[float] = None
    prev_us = poc_voltage_magnitude(PllState(delta, 0.0), pre, base)

    kp, ki, ws = pll.kp, pll.ki, pll.omega_s
    policy = scenario.lvrt

    for i in range(n):
        t = i * dt
        if i < i_fault:
            stage_code, stg = STAGE_PREFAULT, pre
        elif i < i_clear:
            stage_code, stg = STAGE_FAULT, flt
        else:
            stage_code, stg = STAGE_POSTFAULT, post

        # ride-through state machine on the delayed measurement
        if policy.enabled:
            if not lv_active:
                if prev_us < policy.v_enter:
                    lv_active = True
                    exit_since = None
            else:
                if prev_us > policy.v_exit:
                    if exit_since is None:
                        exit_since = t
                    elif t - exit_since >= policy.hold:
                        lv_active = False
                        exit_since = None
                else:
                    exit_since = None
        if lv_active:
            inj = lvrt_currents(prev_us, scenario.base_injection, policy)
        else:
            inj = base

        ug, rg, xg = stg.ug, stg.rg, stg.xg
        u0 = rg * inj.isq + xg * inj.isd
        b = xg * inj.isd / ws
        den = 1.0 - kp * b

        ddelta, _ = _rhs_unchecked(delta, x_int, ug, u0, b, kp, ki, den)
        omega_pll = ws + ddelta
        re = ug * math.cos(delta) + rg * inj.isd - xg * inj.isq
        im = -ug * math.sin(delta) + rg * inj.isq + xg * inj.isd
        us = math.hypot(re, im)
        usq = -ug * math.sin(delta) + rg * inj.isq + (omega_pll / ws) * xg * inj.isd

        out_t[i] = t
        out_delta[i] = delta
        out_x[i] = x_int
        out_w[i] = omega_pll
        out_usq[i] = usq
        out_us[i] = us
        out_isd[i] = inj.isd
        out_isq[i] = inj.isq
        out_stage[i] = stage_code

        prev_us = us
        if i == n_steps:
            break

        # classical RK4, stage and injection frozen across the substeps
        k1d, k1x = _rhs_unchecked(delta, x_int, ug, u0, b, kp, ki, den)
        k2d, k2x = _rhs_unchecked(delta + 0.5 * dt * k1d, x_int + 0.5 * dt * k1x, ug, u0, b, kp, ki, den)
        k3d, k3x = _rhs_unchecked(delta + 0.5 * dt * k2d, x_int + 0.5 * dt * k2x, ug, u0, b, kp, ki, den)
        k4d, k4x = _rhs_unchecked(delta + dt * k3d, x_int + dt * k3x, ug, u0, b, kp, ki, den)
        delta += dt / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d)
        x_int += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)

    return Trajectory(
        t=out_t,
        delta=out_delta,
        x_int=out_x,
        omega_pll=out_w,
        usq=out_usq,
        us_mag=out_us,
        isd=out_isd,
        isq=out_isq,
        stage=out_stage,
        zeta=np.full(n, np.nan),
        in_domain=np.zeros(n, dtype=bool),
        omega_s=ws,
        ki=ki,
        dt=dt,
        i_fault=i_fault,
        i_clear=i_clear,
    )


def classify(
    traj: Trajectory, post: StageParams, inj_post: CurrentInjection
) -> Verdict:
    """Outcome of a run against the post-fault stage.

    Resynchronized: after clearing, the state holds within the lock window of
    the nearest 2*pi-shifted stable equilibrium for LOCK_DWELL seconds
    (settle time is the window start). Loss of synchronization: never locks,
    and the horizon state shows real divergence (kinetic energy beyond any
    basin's capture capability, or sitting past its basin's barrier still
    moving outward). Marginal: neither within the horizon, e.g. a horizon
    that cuts off mid-transient.
    """
    eq = equilibria(post, inj_post)
    if eq is None:
        return Verdict(
            kind=VerdictKind.LOSS_OF_SYNCHRONIZATION,
            first_slip_time=traj.t_clear,
        )
    ds, du = eq.sep.delta, eq.uep.delta
    m = math.sin(ds)
    v_cr = (m * ds + math.cos(ds)) - (m * du + math.cos(du))

    sl = slice(traj.i_clear, traj.n_samples)
    d = traj.delta[sl]
    t = traj.t[sl]
    speed = traj.omega_pll[sl] - traj.omega_s

    basins = np.round((d - ds) / (2.0 * math.pi))
    dist = np.abs(d - ds - 2.0 * math.pi * basins)
    in_window = (dist < LOCK_DELTA_TOL) & (np.abs(speed) < LOCK_SPEED_TOL)

    dwell = max(int(round(LOCK_DWELL / traj.dt)), 1)
    settle_idx = _first_run_start(in_window, dwell + 1)

    # first outward crossing of the principal unstable equilibrium
    outward = 1.0 if du >= ds else -1.0
    crossed = outward * (d - du) > 0.0
    slip_idx = int(np.argmax(crossed)) if bool(crossed.any()) else None
    first_slip = float(t[slip_idx]) if slip_idx is not None else None

    if settle_idx is not None:
        return Verdict(
            kind=VerdictKind.RESYNCHRONIZED,
            settle_time=float(t[settle_idx]),
            first_slip_time=first_slip,
            basin=int(basins[-1]),
        )

    # Loss of synchronization needs evidence beyond "not locked yet": either
    # the normalized kinetic energy at the horizon dwarfs the per-turn
    # barrier (no basin can capture that), or the final state sits past its
    # own basin's barrier still moving outward.
    x_norm_end = traj.x_int[-1] / math.sqrt(traj.ki * post.ug)
    runaway = 0.5 * x_norm_end**2 > 3.0 * (v_cr + 2.0 * math.pi * abs(m))
    folded_end = d[-1] - 2.0 * math.pi * basins[-1]
    escaping = outward * (folded_end - du) > 0.0 and outward * speed[-1] > 0.0
    if runaway or escaping:
        return Verdict(
            kind=VerdictKind.LOSS_OF_SYNCHRONIZATION,
            first_slip_time=first_slip if first_slip is not None else float(t[0]),
        )
    return Verdict(kind=VerdictKind.MARGINAL, first_slip_time=first_slip)


def _first_run_start(mask: np.ndarray, length: int) -> Optional[int]:
    """Index of the first run of ``length`` consecutive True values."""
    if mask.shape[0] < length:
        return None
    run = 0
    for i, ok in enumerate(mask):
        run = run + 1 if ok else 0
        if run >= length:
            return i - length + 1
    return None
