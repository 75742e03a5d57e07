import math

import numpy as np
import pytest

from tss_lab.errors import NoEquilibrium
from tss_lab.lyapunov import (
    LfMode,
    index_arrays,
    index_series,
    lf_params,
    lf_value,
    normalize,
    stability_index,
)
from tss_lab.model import CurrentInjection, PllParams, PllState, StageParams

PLL = PllParams(kp=40.0, ki=1600.0)


def params_for(m: float, mode=LfMode.REDUCED, ki=1600.0, kp=40.0, ug=1.0):
    # xg*isd chosen to produce the wanted offset ratio with rg = 0
    stage = StageParams(ug=ug, rg=0.0, xg=0.2)
    inj = CurrentInjection(isd=m * ug / 0.2, isq=0.0)
    return lf_params(stage, inj, PllParams(kp, ki), mode), stage, inj


class TestLfParams:
    def test_symmetric_case(self):
        p, *_ = params_for(0.0)
        assert p.delta_s == 0.0
        assert p.delta_cr == pytest.approx(math.pi)
        assert p.v_cr == pytest.approx(2.0)

    def test_reference_offset(self):
        p, *_ = params_for(0.2)
        assert p.delta_s == pytest.approx(0.201358, abs=1e-6)
        assert p.delta_cr == pytest.approx(2.940235, abs=1e-6)
        assert p.v_cr == pytest.approx(1.411816, abs=1e-6)

    def test_gamma_for_reference_gains(self):
        p, *_ = params_for(0.2)
        assert p.gamma == pytest.approx(1.0)

    def test_negative_offset_branch(self):
        stage = StageParams(ug=1.0, rg=0.1, xg=0.2)
        inj = CurrentInjection(isd=0.0, isq=-1.0)
        p = lf_params(stage, inj, PLL)
        assert p.m == pytest.approx(-0.1)
        assert p.delta_cr == pytest.approx(-math.pi - p.delta_s)
        assert p.v_cr > 0.0

    def test_rejects_missing_equilibrium(self):
        stage = StageParams(ug=0.1, rg=0.0, xg=0.2)
        with pytest.raises(NoEquilibrium):
            lf_params(stage, CurrentInjection(1.0, 0.0), PLL)
        with pytest.raises(NoEquilibrium):
            lf_params(StageParams(0.0, 0.0, 0.2), CurrentInjection(0.0, 0.0), PLL)


class TestLfValue:
    def test_zero_at_sep(self):
        p, stage, inj = params_for(0.3)
        assert lf_value(PllState(p.delta_s, 0.0), p, PLL.ki, stage.ug) == pytest.approx(0.0, abs=1e-15)

    def test_critical_level_at_uep(self):
        p, stage, inj = params_for(0.3)
        v = lf_value(PllState(p.delta_cr, 0.0), p, PLL.ki, stage.ug)
        assert v == pytest.approx(p.v_cr, rel=1e-12)

    def test_hand_evaluated_point(self):
        p, stage, _ = params_for(0.2)
        x = 0.5  # normalized; x_int = x*sqrt(ki*ug)
        state = PllState(1.0, x * math.sqrt(PLL.ki * stage.ug))
        assert lf_value(state, p, PLL.ki, stage.ug) == pytest.approx(0.404765, abs=1e-6)

    def test_nonnegative_on_window(self):
        p, stage, _ = params_for(0.25)
        rng = np.random.default_rng(11)
        lo, hi = p.window
        d = rng.uniform(lo, hi, 10_000)
        x = rng.uniform(-3.0, 3.0, 10_000)
        v = 0.5 * x**2 - (p.m * d + np.cos(d)) + (p.m * p.delta_s + math.cos(p.delta_s))
        assert (v >= -1e-12).all()
        # zero only at the equilibrium
        state_v = lf_value(PllState(p.delta_s, 0.0), p, PLL.ki, stage.ug)
        assert state_v == pytest.approx(0.0, abs=1e-15)
        away = v[(np.abs(d - p.delta_s) > 1e-3) | (np.abs(x) > 1e-3)]
        assert (away > 0.0).all()

    def test_full_mode_tends_to_reduced_as_h_shrinks(self):
        rng = np.random.default_rng(5)
        states = [PllState(rng.uniform(-1, 2), rng.uniform(-40, 40)) for _ in range(50)]
        stage = StageParams(ug=1.0, rg=0.0, xg=0.2)
        ratios = []
        for scale in (1.0, 0.5, 0.25, 0.125):
            inj = CurrentInjection(isd=scale, isq=0.0)
            p_full = lf_params(stage, inj, PLL, LfMode.FULL)
            p_red = lf_params(stage, inj, PLL, LfMode.REDUCED)
            gap = max(
                abs(
                    lf_value(s, p_full, PLL.ki, stage.ug)
                    - lf_value(s, p_red, PLL.ki, stage.ug)
                )
                for s in states
            )
            ratios.append(gap / p_full.h)
        # |V_full - V_reduced| <= C*h with one finite C across the sweep
        assert max(ratios) < 10.0 * min(r for r in ratios if r > 0)

    def test_full_equals_reduced_at_zero_h(self):
        stage = StageParams(ug=1.0, rg=0.5, xg=0.2)
        inj = CurrentInjection(isd=0.0, isq=0.4)  # rg*isq offset, no reactive h term
        p_full = lf_params(stage, inj, PLL, LfMode.FULL)
        assert p_full.h == 0.0
        p_red = lf_params(stage, inj, PLL, LfMode.REDUCED)
        for d, xn in [(-1.0, 0.5), (0.3, -1.2), (2.0, 2.0)]:
            s = PllState(d, xn * math.sqrt(PLL.ki * stage.ug))
            assert lf_value(s, p_full, PLL.ki, stage.ug) == pytest.approx(
                lf_value(s, p_red, PLL.ki, stage.ug), abs=1e-12
            )


class TestStabilityIndex:
    def test_unity_at_sep(self):
        p, stage, _ = params_for(0.2)
        pt = stability_index(PllState(p.delta_s, 0.0), p, PLL.ki, stage.ug)
        assert pt.zeta == pytest.approx(1.0)
        assert pt.in_domain and pt.basin == 0

    def test_zero_at_critical_point(self):
        p, stage, _ = params_for(0.2)
        pt = stability_index(PllState(p.delta_cr, 0.0), p, PLL.ki, stage.ug)
        assert pt.zeta == pytest.approx(0.0, abs=1e-12)

    def test_folding_maps_shifted_equilibria_home(self):
        p, stage, _ = params_for(0.2)
        for k in (-2, -1, 1, 3):
            pt = stability_index(
                PllState(p.delta_s + 2.0 * math.pi * k, 0.0), p, PLL.ki, stage.ug
            )
            assert pt.zeta == pytest.approx(1.0, abs=1e-12)
            assert pt.basin == k and pt.in_domain

    def test_unfolded_evaluation_available(self):
        p, stage, _ = params_for(0.2)
        state = PllState(p.delta_s + 2.0 * math.pi, 0.0)
        raw = stability_index(state, p, PLL.ki, stage.ug, fold=False)
        assert raw.zeta == pytest.approx(1.0 + 2.0 * math.pi * p.m / p.v_cr)
        assert not raw.in_domain

    def test_out_of_window_flagged(self):
        p, stage, _ = params_for(0.2)
        # folded angle lands past the barrier: within delta_s of the UEP top
        state = PllState(math.pi, 0.0)
        pt = stability_index(state, p, PLL.ki, stage.ug)
        assert not pt.in_domain

    def test_sign_consistent_under_normalization(self):
        p, stage, _ = params_for(0.35)
        rng = np.random.default_rng(9)
        for _ in range(100):
            st = PllState(rng.uniform(-2, 2), rng.uniform(-80, 80))
            ns = normalize(st, PLL.ki, stage.ug)
            v_direct = lf_value(st, p, PLL.ki, stage.ug)
            v_norm = 0.5 * ns.x**2 - (p.m * ns.delta + math.cos(ns.delta)) + (
                p.m * p.delta_s + math.cos(p.delta_s)
            )
            assert math.copysign(1, 1 - v_direct / p.v_cr) == math.copysign(
                1, 1 - v_norm / p.v_cr
            )


class TestIndexSeries:
    def test_case1_series_turns_negative(self, case_results):
        traj = case_results[1].trajectory
        post_clear = traj.zeta[traj.i_clear :]
        assert post_clear[-1] < 0.0
        assert traj.zeta[-1] == min(traj.zeta)

    def test_stable_cases_end_at_unity(self, case_results):
        for cid in (2, 3, 4, 5, 6):
            assert case_results[cid].final_zeta == pytest.approx(1.0, abs=1e-3)

    def test_settled_index_reaches_unity(self, case_results):
        traj = case_results[2].trajectory
        settle = case_results[2].verdict.settle_time
        i = int(round(settle / traj.dt))
        assert traj.zeta[i:].min() > 1.0 - 1e-3

    def test_constant_sep_series_is_unity(self, scenarios):
        import dataclasses

        s = scenarios[2]
        s = dataclasses.replace(s, fault=dataclasses.replace(s.fault, z_eq=1e9), horizon=1.8)
        from tss_lab.simulate import post_injection, run

        traj = run(s)
        post = s.stages()[2]
        index_series(traj, post, post_injection(post, s.base_injection, s.lvrt), s.pll)
        assert traj.zeta.min() > 0.995

    def test_vectorized_matches_scalar(self):
        p, stage, _ = params_for(0.2)
        rng = np.random.default_rng(21)
        d = rng.uniform(-8, 8, 200)
        x = rng.uniform(-100, 100, 200)
        z, in_dom = index_arrays(d, x, p, PLL.ki, stage.ug)
        for i in range(0, 200, 17):
            pt = stability_index(PllState(d[i], x[i]), p, PLL.ki, stage.ug)
            assert z[i] == pytest.approx(pt.zeta, rel=1e-12)
            assert in_dom[i] == pt.in_domain
