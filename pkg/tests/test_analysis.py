import math
from dataclasses import replace

import numpy as np
import pytest

from tss_lab.analysis import (
    CctStatus,
    RoaGridSpec,
    RoaMap,
    case_suite,
    cct_bisection,
    conservativeness_audit,
    eac_comparison,
    first_swing_stable,
    roa_grid,
    simulate_fates,
)
from tss_lab.errors import CertificationViolation
from tss_lab.lyapunov import lf_params
from tss_lab.model import CurrentInjection, PllParams, StageParams
from tss_lab.simulate import post_injection, run

PLL = PllParams(kp=40.0, ki=1600.0)
POST = StageParams(1.0, 0.0, 0.2)
INJ = CurrentInjection(1.0, 0.0)


@pytest.fixture(scope="module")
def reference_cct(scenarios):
    return cct_bisection(scenarios[1], tol_s=1e-3)


class TestCctBisection:
    def test_reference_case_bracketed(self, reference_cct):
        assert reference_cct.status is CctStatus.BRACKETED
        assert 0.1 < reference_cct.cct < 0.2

    def test_boundary_consistency(self, scenarios, reference_cct):
        s = scenarios[1]
        tol = 1e-3
        for fct, expect in ((reference_cct.cct - tol, True), (reference_cct.bracket[1] + tol, False)):
            sc = replace(s, fault=replace(s.fault, fct=fct), horizon=None)
            traj = run(sc)
            post = sc.stages()[2]
            from tss_lab.simulate import classify

            v = classify(traj, post, post_injection(post, sc.base_injection, sc.lvrt))
            assert v.stable == expect

    def test_single_phase_always_stable(self, scenarios):
        res = cct_bisection(scenarios[2], tol_s=1e-3, probe_upper=0.5)
        assert res.status is CctStatus.ALWAYS_STABLE

    def test_verdict_monotone_in_clearing_time(self, scenarios, reference_cct):
        s = scenarios[1]
        cct = reference_cct.cct
        for fct in np.linspace(0.02, cct - 2e-3, 5):
            sc = replace(s, fault=replace(s.fault, fct=float(fct)), horizon=None)
            traj = run(sc)
            post = sc.stages()[2]
            from tss_lab.simulate import classify

            assert classify(traj, post, post_injection(post, sc.base_injection, sc.lvrt)).stable
        for fct in np.linspace(cct + 3e-3, 0.6, 5):
            sc = replace(s, fault=replace(s.fault, fct=float(fct)), horizon=None)
            traj = run(sc)
            post = sc.stages()[2]
            from tss_lab.simulate import classify

            assert not classify(
                traj, post, post_injection(post, sc.base_injection, sc.lvrt)
            ).stable


class TestRoaGrid:
    def test_equilibrium_point_converges(self):
        spec = RoaGridSpec(resolution=3, delta_range=(0.2013, 0.2014), x_range=(-1e-4, 1e-4))
        roa = roa_grid(POST, INJ, PLL, spec)
        assert roa.converged.all()
        assert (roa.zeta > 0.99).all()

    def test_point_beyond_barrier_is_uncertified(self):
        from tss_lab.lyapunov import index_arrays

        p = lf_params(POST, INJ, PLL)
        z, _ = index_arrays(
            np.array([p.delta_cr + 0.1]), np.array([20.0]), p, PLL.ki, POST.ug
        )
        assert z[0] <= 0.0

    def test_fast_state_beyond_barrier_diverges(self):
        # past the barrier with kinetic energy no basin can absorb
        p = lf_params(POST, INJ, PLL)
        fate = simulate_fates(
            np.array([p.delta_cr + 0.1]),
            np.array([3.0 * math.sqrt(PLL.ki * POST.ug)]),
            POST,
            INJ,
            PLL,
            horizon=1.5,
        )
        assert not fate[0]

    def test_certified_region_is_converged(self):
        spec = RoaGridSpec(resolution=41)
        roa = roa_grid(POST, INJ, PLL, spec)
        certified = (roa.zeta > 0) & roa.in_domain
        assert certified.sum() > 0
        assert (roa.converged[certified]).all()

    def test_dt_invariance_sampled(self):
        rng = np.random.default_rng(17)
        p = lf_params(POST, INJ, PLL)
        lo, hi = p.window
        d = rng.uniform(lo, hi, 100)
        x = rng.uniform(-3, 3, 100) * math.sqrt(PLL.ki * POST.ug)
        fate_a = simulate_fates(d, x, POST, INJ, PLL, dt=2e-4)
        fate_b = simulate_fates(d, x, POST, INJ, PLL, dt=1e-4)
        assert (fate_a == fate_b).all()


class TestConservativenessAudit:
    def test_clean_map_passes(self):
        roa = roa_grid(POST, INJ, PLL, RoaGridSpec(resolution=31))
        report = conservativeness_audit(roa)
        assert report.sound
        assert report.n_certified > 0
        assert report.n_uncertified_converged > 0
        assert 0.0 < report.fraction_conservative < 1.0

    def test_violation_raises_with_states(self):
        p = lf_params(POST, INJ, PLL)
        roa = RoaMap(
            delta=np.array([p.delta_s]),
            x=np.array([0.0]),
            zeta=np.array([[0.5]]),
            in_domain=np.array([[True]]),
            converged=np.array([[False]]),  # forged: certified yet diverged
            params=p,
            ki=PLL.ki,
            ug=POST.ug,
        )
        with pytest.raises(CertificationViolation) as exc:
            conservativeness_audit(roa)
        assert len(exc.value.states) == 1

    def test_degenerate_sep_grid(self):
        spec = RoaGridSpec(resolution=3, delta_range=(0.2013, 0.2014), x_range=(-1e-5, 1e-5))
        report = conservativeness_audit(roa_grid(POST, INJ, PLL, spec))
        assert report.n_certified == 9
        assert report.n_uncertified_converged == 0


class TestEacComparison:
    def test_reference_case(self, scenarios):
        cmp = eac_comparison(scenarios[1], tol_s=2e-3)
        assert cmp.cct_eac is not None and cmp.cct_first_swing is not None
        assert cmp.cct_sim > cmp.cct_first_swing  # re-locking buys extra margin
        assert cmp.band_width is not None and cmp.band_width > 0
        # undamped estimate overshoots: fault-on damping is destabilizing here
        assert cmp.signed_error > 0

    def test_first_swing_stable_flag(self, case_results, scenarios):
        post2 = scenarios[2].stages()[2]
        inj2 = post_injection(post2, scenarios[2].base_injection, scenarios[2].lvrt)
        assert first_swing_stable(case_results[2].trajectory, post2, inj2)
        post1 = scenarios[1].stages()[2]
        inj1 = post_injection(post1, scenarios[1].base_injection, scenarios[1].lvrt)
        assert not first_swing_stable(case_results[1].trajectory, post1, inj1)


class TestCaseSuite:
    def test_subset_suite_merges_by_id(self, scenarios):
        suite = case_suite({2: scenarios[2], 5: scenarios[5]})
        assert sorted(suite.cases) == [2, 5]
        assert suite.cases[2].verdict.stable

    def test_rankings_cover_requested_ids(self, scenarios):
        suite = case_suite({1: scenarios[1], 4: scenarios[4]})
        order = suite.ranking_by_settle_time(ids=(1, 4))
        assert order == [4, 1]  # case 1 never settles, sorts last
