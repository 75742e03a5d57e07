"""Simulation-backed analyses: clearing-time search, basin mapping, index audit.

These are the oracles that sit above the single-run simulator: bisection of
the critical clearing time over verdicts, brute-force classification of the
post-fault state plane, a soundness/conservatism audit of the stability
index against the brute-force map, and the bundled six-case study.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

import numpy as np

from .errors import CertificationViolation, NoEquilibrium
from .eac import eac_report
from .lyapunov import LfMode, LyapunovParams, index_arrays, index_series, lf_params
from .model import CurrentInjection, PllParams, StageParams, equilibria, loop_denominator
from .simulate import (
    LOCK_DELTA_TOL,
    LOCK_DWELL,
    LOCK_SPEED_TOL,
    Scenario,
    Trajectory,
    Verdict,
    classify,
    post_injection,
    run,
)

X_ESCAPE = 500.0  # rad/s on |x_int|: past this the loop is gone for good


class CctStatus(Enum):
    BRACKETED = "bracketed"
    ALWAYS_STABLE = "always_stable"
    NEVER_STABLE = "never_stable"


@dataclass(frozen=True)
class CctResult:
    status: CctStatus
    cct: Optional[float] = None            # largest stable fct found, s
    bracket: Optional[tuple[float, float]] = None  # (stable, unstable) fct pair


@dataclass(frozen=True)
class RoaGridSpec:
    """Sampling plan for the post-fault state plane.

    ``delta_range`` defaults to the certificate window of the stage;
    ``x_range`` is in normalized x = x_int/sqrt(ki*Ug).
    """

    delta_range: Optional[tuple[float, float]] = None
    x_range: tuple[float, float] = (-3.0, 3.0)
    resolution: int = 101
    horizon: float = 2.0
    dt: float = 2e-4

    def __post_init__(self):
        if self.delta_range is not None and not self.delta_range[0] < self.delta_range[1]:
            raise ValueError("delta_range must be increasing")
        if not self.x_range[0] < self.x_range[1]:
            raise ValueError("x_range must be increasing")
        if self.resolution < 3:
            raise ValueError("resolution must be >= 3")


@dataclass
class RoaMap:
    """Brute-force fate map of the post-fault plane plus the index over it."""

    delta: np.ndarray       # (n,)
    x: np.ndarray           # (n,) normalized
    zeta: np.ndarray        # (n, n) [delta, x]
    in_domain: np.ndarray   # (n, n) bool
    converged: np.ndarray   # (n, n) bool, simulated fate
    params: LyapunovParams
    ki: float
    ug: float


@dataclass(frozen=True)
class ConservativenessReport:
    n_certified: int
    n_certified_diverged: int
    n_uncertified_converged: int
    fraction_conservative: float  # uncertified-converged / converged

    @property
    def sound(self) -> bool:
        return self.n_certified_diverged == 0


@dataclass
class CaseResult:
    case_id: int
    verdict: Verdict
    min_zeta: float
    final_zeta: float
    zeta_at_clearing: float
    trajectory: Trajectory


@dataclass
class CaseSuiteResult:
    cases: dict[int, CaseResult]

    def ranking_by_final_zeta(self, ids=(1, 3, 4, 5, 6)) -> list[int]:
        """Case ids sorted by final index value, best first."""
        return sorted(ids, key=lambda c: self.cases[c].final_zeta, reverse=True)

    def ranking_by_settle_time(self, ids=(1, 3, 4, 5, 6)) -> list[int]:
        """Case ids sorted by resynchronization speed, fastest first;
        never-resynchronized cases sort last."""
        def key(c: int) -> float:
            v = self.cases[c].verdict
            if v.settle_time is None:
                return math.inf
            return v.settle_time - self.cases[c].trajectory.t_clear
        return sorted(ids, key=key)


def cct_bisection(
    scenario: Scenario,
    tol_s: float = 1e-3,
    probe_upper: float = 1.0,
) -> CctResult:
    """Largest stable clearing time by bisection over run/classify verdicts.

    Assumes the verdict is monotone in fct (longer faults only hurt), which
    holds for the staged scenarios here and is audited separately.
    """

    def stable_at(fct: float) -> bool:
        sc = replace(scenario, fault=replace(scenario.fault, fct=fct), horizon=None)
        traj = run(sc)
        post = sc.stages()[2]
        inj_p = post_injection(post, sc.base_injection, sc.lvrt)
        return classify(traj, post, inj_p).stable

    lo = max(scenario.dt, tol_s)
    if not stable_at(lo):
        return CctResult(CctStatus.NEVER_STABLE)
    if stable_at(probe_upper):
        return CctResult(CctStatus.ALWAYS_STABLE, cct=probe_upper)

    hi = probe_upper
    while hi - lo > tol_s:
        mid = 0.5 * (lo + hi)
        if stable_at(mid):
            lo = mid
        else:
            hi = mid
    return CctResult(CctStatus.BRACKETED, cct=lo, bracket=(lo, hi))


def simulate_fates(
    delta0: np.ndarray,
    x_int0: np.ndarray,
    stage: StageParams,
    inj: CurrentInjection,
    pll: PllParams,
    horizon: float = 2.0,
    dt: float = 2e-4,
) -> np.ndarray:
    """Vectorized fate of autonomous post-fault initial states.

    True where the trajectory enters and holds the lock window of the nearest
    2*pi-shifted stable equilibrium (same criterion as the verdict logic);
    False otherwise, including still-wandering states at the horizon.
    """
    eq = equilibria(stage, inj)
    if eq is None:
        raise NoEquilibrium("stage admits no equilibrium; every state diverges")
    den = loop_denominator(stage, inj, pll)
    ds = eq.sep.delta
    kp, ki, ws = pll.kp, pll.ki, pll.omega_s
    ug = stage.ug
    u0 = stage.rg * inj.isq + stage.xg * inj.isd
    b = stage.xg * inj.isd / ws
    two_pi = 2.0 * math.pi

    d = np.array(delta0, dtype=float).ravel().copy()
    x = np.array(x_int0, dtype=float).ravel().copy()
    n = d.shape[0]
    converged = np.zeros(n, dtype=bool)
    alive = np.arange(n)
    counter = np.zeros(n, dtype=np.int32)
    dwell = max(int(round(LOCK_DWELL / dt)), 1)
    n_steps = int(round(horizon / dt))

    def rhs(dd, xx):
        forcing = u0 - ug * np.sin(dd)
        return (kp * forcing + xx) / den, (ki * forcing + ki * b * xx) / den

    for step in range(n_steps):
        k1d, k1x = rhs(d, x)
        k2d, k2x = rhs(d + 0.5 * dt * k1d, x + 0.5 * dt * k1x)
        k3d, k3x = rhs(d + 0.5 * dt * k2d, x + 0.5 * dt * k2x)
        k4d, k4x = rhs(d + dt * k3d, x + dt * k3x)
        d = d + dt / 6.0 * (k1d + 2 * k2d + 2 * k3d + k4d)
        x = x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)

        speed, _ = rhs(d, x)
        dist = np.abs(d - ds - two_pi * np.round((d - ds) / two_pi))
        ok = (dist < LOCK_DELTA_TOL) & (np.abs(speed) < LOCK_SPEED_TOL)
        counter[ok] += 1
        counter[~ok] = 0
        newly = counter >= dwell
        gone = np.abs(x) > X_ESCAPE
        if newly.any() or gone.any():
            converged[alive[newly]] = True
            keep = ~(newly | gone)
            if not keep.all():
                d, x, counter, alive = d[keep], x[keep], counter[keep], alive[keep]
                if alive.size == 0:
                    break
    return converged


def roa_grid(
    post_stage: StageParams,
    post_inj: CurrentInjection,
    pll: PllParams,
    spec: RoaGridSpec = RoaGridSpec(),
    mode: LfMode = LfMode.REDUCED,
) -> RoaMap:
    """Brute-force basin map over a (delta, x) grid, with the index alongside."""
    p = lf_params(post_stage, post_inj, pll, mode)
    lo, hi = spec.delta_range if spec.delta_range is not None else p.window
    delta_axis = np.linspace(lo, hi, spec.resolution)
    x_axis = np.linspace(spec.x_range[0], spec.x_range[1], spec.resolution)
    dd, xx = np.meshgrid(delta_axis, x_axis, indexing="ij")
    x_int = xx * math.sqrt(pll.ki * post_stage.ug)

    fates = simulate_fates(
        dd.ravel(), x_int.ravel(), post_stage, post_inj, pll,
        horizon=spec.horizon, dt=spec.dt,
    ).reshape(dd.shape)
    zeta, in_dom = index_arrays(dd.ravel(), x_int.ravel(), p, pll.ki, post_stage.ug)
    return RoaMap(
        delta=delta_axis,
        x=x_axis,
        zeta=zeta.reshape(dd.shape),
        in_domain=in_dom.reshape(dd.shape),
        converged=fates,
        params=p,
        ki=pll.ki,
        ug=post_stage.ug,
    )


def conservativeness_audit(roa: RoaMap) -> ConservativenessReport:
    """Cross-tabulate index sign against simulated fate.

    Any certified-but-diverged point is a hard failure and raises
    CertificationViolation with the offending states attached. Uncertified
    points that nevertheless converge measure the index's conservatism.
    """
    certified = (roa.zeta > 0.0) & roa.in_domain
    cd = certified & ~roa.converged
    uc = ~certified & roa.converged
    n_conv = int(roa.converged.sum())
    report = ConservativenessReport(
        n_certified=int(certified.sum()),
        n_certified_diverged=int(cd.sum()),
        n_uncertified_converged=int(uc.sum()),
        fraction_conservative=float(uc.sum()) / n_conv if n_conv else 0.0,
    )
    if report.n_certified_diverged:
        ii, jj = np.nonzero(cd)
        states = [
            (float(roa.delta[i]), float(roa.x[j]), float(roa.zeta[i, j]))
            for i, j in zip(ii, jj)
        ]
        raise CertificationViolation(states)
    return report


def first_swing_stable(
    traj: Trajectory, post: StageParams, inj_post: CurrentInjection
) -> bool:
    """True when the angle never passes the post-fault unstable equilibrium.

    This is the outcome the equal-area criterion predicts; the full verdict
    is more lenient because the loop can re-lock after slipping.
    """
    eq = equilibria(post, inj_post)
    if eq is None:
        return False
    ds, du = eq.sep.delta, eq.uep.delta
    outward = 1.0 if du >= ds else -1.0
    return not bool((outward * (traj.delta - du) > 0.0).any())


@dataclass(frozen=True)
class EacComparison:
    """Equal-area estimate against simulated clearing-time boundaries.

    The signed error and disagreement band compare the undamped equal-area
    estimate with the first-swing simulated boundary (like against like);
    ``cct_sim`` is the full re-lock boundary from the verdict logic.
    """

    cct_eac: Optional[float]
    cct_first_swing: Optional[float]
    cct_sim: Optional[float]
    signed_error: Optional[float]               # cct_eac - cct_first_swing
    disagreement_band: Optional[tuple[float, float]]

    @property
    def band_width(self) -> Optional[float]:
        if self.disagreement_band is None:
            return None
        return self.disagreement_band[1] - self.disagreement_band[0]


def first_swing_cct(
    scenario: Scenario, tol_s: float = 1e-3, probe_upper: float = 1.0
) -> CctResult:
    """Largest fct whose trajectory stays on the stable side of the UEP."""

    def ok(fct: float) -> bool:
        sc = replace(scenario, fault=replace(scenario.fault, fct=fct), horizon=None)
        traj = run(sc)
        post = sc.stages()[2]
        inj_p = post_injection(post, sc.base_injection, sc.lvrt)
        return first_swing_stable(traj, post, inj_p)

    lo = max(scenario.dt, tol_s)
    if not ok(lo):
        return CctResult(CctStatus.NEVER_STABLE)
    if ok(probe_upper):
        return CctResult(CctStatus.ALWAYS_STABLE, cct=probe_upper)
    hi = probe_upper
    while hi - lo > tol_s:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return CctResult(CctStatus.BRACKETED, cct=lo, bracket=(lo, hi))


def eac_comparison(scenario: Scenario, tol_s: float = 1e-3) -> EacComparison:
    """Measure the equal-area clearing-time error against simulation."""
    cct_e = eac_report(scenario).cct_eac
    fs = first_swing_cct(scenario, tol_s=tol_s)
    full = cct_bisection(scenario, tol_s=tol_s)
    cct_fs = fs.cct if fs.status is CctStatus.BRACKETED else None
    cct_full = full.cct if full.status is CctStatus.BRACKETED else None
    if cct_e is not None and cct_fs is not None:
        err = cct_e - cct_fs
        band = (min(cct_e, cct_fs), max(cct_e, cct_fs))
    else:
        err = None
        band = None
    return EacComparison(
        cct_eac=cct_e,
        cct_first_swing=cct_fs,
        cct_sim=cct_full,
        signed_error=err,
        disagreement_band=band,
    )


def analyze_case(case_id: int, scenario: Scenario) -> CaseResult:
    """Run one scenario and evaluate the index series against its post-fault stage."""
    traj = run(scenario)
    post = scenario.stages()[2]
    inj_p = post_injection(post, scenario.base_injection, scenario.lvrt)
    verdict = classify(traj, post, inj_p)
    try:
        index_series(traj, post, inj_p, scenario.pll)
        min_zeta = float(np.min(traj.zeta))
        final_zeta = float(traj.zeta[-1])
        zeta_clear = float(traj.zeta[traj.i_clear])
    except NoEquilibrium:
        min_zeta = final_zeta = zeta_clear = float("nan")
    return CaseResult(
        case_id=case_id,
        verdict=verdict,
        min_zeta=min_zeta,
        final_zeta=final_zeta,
        zeta_at_clearing=zeta_clear,
        trajectory=traj,
    )


def _worker(args: tuple[int, Scenario]) -> CaseResult:
    return analyze_case(*args)


def case_suite(scenarios: Optional[dict[int, Scenario]] = None) -> CaseSuiteResult:
    """Run the bundled six-case study (or a custom id -> scenario map).

    Workers fan out across processes when TSS_LAB_THREADS > 1; results merge
    by case id, so the output is order-independent and deterministic.
    """
    if scenarios is None:
        from .config import bundled_scenarios

        scenarios = bundled_scenarios()
    items = sorted(scenarios.items())
    workers = int(os.environ.get("TSS_LAB_THREADS", "1") or "1")
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
            results = list(pool.map(_worker, items))
    else:
        results = [analyze_case(cid, sc) for cid, sc in items]
    return CaseSuiteResult(cases={r.case_id: r for r in results})
