"""Command-line front end: simulate, index, cct, roa, cases.

Every command reads one scenario document (``--config``) and writes files
into ``--out``. Exit codes: 0 success, 1 usage, 2 configuration problem,
3 model/scenario error, 4 certification violation.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

from . import analysis, io
from .config import ScenarioConfig, parse_config
from .errors import (
    CertificationViolation,
    ConfigError,
    NoEquilibrium,
    TssLabError,
    ValidationError,
)
from .lyapunov import index_series, lf_params
from .simulate import Scenario, classify, post_injection, run

EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_MODEL = 3
EXIT_CERTIFICATION = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="tss-lab",
        description=(
            "Reduced-order transient synchronization stability lab: staged "
            "fault simulation, stability index, clearing-time search, and "
            "basin mapping for a PLL-synchronized plant behind an MMC-formed "
            "offshore grid."
        ),
        epilog=(
            "Configuration defaults when a field is omitted: solver step "
            "sim.dt = 5e-5 s; horizon = fault.t_fault + fault.fct + 1.0 s; "
            "fault.location = 1.0 (at the station bus); fault.z_eq = preset "
            "per fault type; LVRT v_enter/v_exit/hold/i_max/k_q = "
            "0.9/0.92/0.02 s/1.2/1.5; mmc u_mmc_pos/i_lim = 1.0/1.2; "
            "output.decimate = 1. TSS_LAB_THREADS caps case-suite workers."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, config_required: bool = True) -> None:
        p.add_argument(
            "--config",
            required=config_required,
            help="scenario document (JSON); see the packaged case files",
        )
        p.add_argument(
            "--out",
            default="tss-lab-out",
            help="output directory (created if missing; default: %(default)s)",
        )
        p.add_argument("--dt", type=float, default=None, help="override solver step, s")
        p.add_argument(
            "--horizon", type=float, default=None, help="override simulated time span, s"
        )

    p = sub.add_parser("simulate", help="run one scenario, write trajectory + summary")
    common(p)
    p.add_argument(
        "--decimate", type=int, default=None,
        help="keep every n-th trajectory sample (default: the config's output.decimate)",
    )

    p = sub.add_parser("index", help="trajectory with the stability-index column")
    common(p)
    p.add_argument("--decimate", type=int, default=None,
                   help="keep every n-th trajectory sample (default: the config's output.decimate)")

    p = sub.add_parser("cct", help="critical clearing time, simulated and equal-area")
    common(p)
    p.add_argument(
        "--tol", type=float, default=1e-3,
        help="clearing-time bisection tolerance, s (default: %(default)s)",
    )

    p = sub.add_parser("roa", help="post-fault basin map and index audit")
    common(p)
    p.add_argument("--resolution", type=int, default=101, help="grid points per axis")
    p.add_argument("--grid-dt", type=float, default=2e-4, help="grid integration step, s")
    p.add_argument("--grid-horizon", type=float, default=2.0, help="grid horizon, s")

    p = sub.add_parser("cases", help="run the packaged six-case study")
    common(p, config_required=False)
    p.add_argument(
        "--decimate", type=int, default=20,
        help="trajectory decimation for the per-case files (default: %(default)s)",
    )
    return parser


def _load(args) -> ScenarioConfig:
    cfg = parse_config(args.config)
    overrides = {}
    if args.dt is not None:
        if args.dt <= 0:
            raise ValidationError("sim.dt", "must be > 0")
        overrides["dt"] = args.dt
    if args.horizon is not None:
        if args.horizon <= cfg.t_fault + cfg.fct:
            raise ValidationError("sim.horizon", "must exceed fault.t_fault + fault.fct")
        overrides["horizon"] = args.horizon
    return replace(cfg, **overrides) if overrides else cfg


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fill_index(traj, scenario: Scenario) -> Optional[dict]:
    post = scenario.stages()[2]
    inj_p = post_injection(post, scenario.base_injection, scenario.lvrt)
    try:
        index_series(traj, post, inj_p, scenario.pll)
        p = lf_params(post, inj_p, scenario.pll)
    except NoEquilibrium:
        return None
    return {
        "m": p.m,
        "delta_s": p.delta_s,
        "delta_cr": p.delta_cr,
        "v_cr": p.v_cr,
        "gamma": p.gamma,
        "h": p.h,
        "min": float(traj.zeta.min()),
        "final": float(traj.zeta[-1]),
        "at_clearing": float(traj.zeta[traj.i_clear]),
    }


def _verdict_dict(verdict) -> dict:
    return {
        "kind": verdict.kind.value,
        "settle_time": verdict.settle_time,
        "first_slip_time": verdict.first_slip_time,
        "basin": verdict.basin,
    }


def _run_summary(cfg: ScenarioConfig, scenario: Scenario, traj, verdict, zeta: Optional[dict]) -> dict:
    pre, flt, post = scenario.stages()
    return {
        "name": cfg.name,
        "verdict": _verdict_dict(verdict),
        "zeta": zeta,
        "stages": {
            "prefault": io.stage_dict(pre),
            "fault": io.stage_dict(flt),
            "postfault": io.stage_dict(post),
        },
        "timing": {
            "dt": scenario.dt,
            "horizon": scenario.effective_horizon(),
            "t_fault": scenario.fault.t_fault,
            "t_clear": scenario.fault.t_fault + scenario.fault.fct,
            "n_samples": traj.n_samples,
        },
    }


def cmd_simulate(args) -> int:
    cfg = _load(args)
    scenario = cfg.scenario()
    traj = run(scenario)
    post = scenario.stages()[2]
    inj_p = post_injection(post, scenario.base_injection, scenario.lvrt)
    verdict = classify(traj, post, inj_p)
    zeta = _fill_index(traj, scenario)
    out = _outdir(args)
    decimate = args.decimate if args.decimate is not None else cfg.decimate
    io.write_trajectory_csv(traj, out / f"{cfg.name}_trajectory.csv", decimate=decimate)
    io.write_json(_run_summary(cfg, scenario, traj, verdict, zeta), out / f"{cfg.name}_summary.json")
    print(f"{cfg.name}: {verdict.kind.value}"
          + (f", settle {verdict.settle_time:.4f} s" if verdict.settle_time else ""))
    return 0


def cmd_index(args) -> int:
    cfg = _load(args)
    scenario = cfg.scenario()
    traj = run(scenario)
    zeta = _fill_index(traj, scenario)
    if zeta is None:
        print("post-fault stage admits no equilibrium; index undefined", file=sys.stderr)
        return EXIT_MODEL
    out = _outdir(args)
    decimate = args.decimate if args.decimate is not None else cfg.decimate
    io.write_trajectory_csv(traj, out / f"{cfg.name}_index.csv", decimate=decimate)
    io.write_json({"name": cfg.name, "zeta": zeta}, out / f"{cfg.name}_index.json")
    print(f"{cfg.name}: zeta min {zeta['min']:.4f}, final {zeta['final']:.4f}")
    return 0


def cmd_cct(args) -> int:
    cfg = _load(args)
    scenario = cfg.scenario()
    comparison = analysis.eac_comparison(scenario, tol_s=args.tol)
    out = _outdir(args)
    payload = {
        "name": cfg.name,
        "cct_sim": comparison.cct_sim,
        "cct_first_swing": comparison.cct_first_swing,
        "cct_eac": comparison.cct_eac,
        "signed_error_eac_vs_first_swing": comparison.signed_error,
        "disagreement_band": list(comparison.disagreement_band)
        if comparison.disagreement_band
        else None,
        "tolerance": args.tol,
    }
    io.write_json(payload, out / f"{cfg.name}_cct.json")
    print(
        f"{cfg.name}: cct_sim={_ms(comparison.cct_sim)} "
        f"first_swing={_ms(comparison.cct_first_swing)} eac={_ms(comparison.cct_eac)}"
    )
    return 0


def _ms(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value * 1e3:.1f} ms"


def cmd_roa(args) -> int:
    cfg = _load(args)
    scenario = cfg.scenario()
    post = scenario.stages()[2]
    inj_p = post_injection(post, scenario.base_injection, scenario.lvrt)
    spec = analysis.RoaGridSpec(
        resolution=args.resolution, dt=args.grid_dt, horizon=args.grid_horizon
    )
    roa = analysis.roa_grid(post, inj_p, scenario.pll, spec)
    out = _outdir(args)
    io.write_roa_csv(roa, out / f"{cfg.name}_roa.csv")
    try:
        report = analysis.conservativeness_audit(roa)
    except CertificationViolation as exc:
        io.write_json(
            {"name": cfg.name, "certified_diverged": len(exc.states), "states": exc.states},
            out / f"{cfg.name}_roa_report.json",
        )
        print(f"certification violation: {len(exc.states)} state(s)", file=sys.stderr)
        return EXIT_CERTIFICATION
    io.write_json(
        {
            "name": cfg.name,
            "n_certified": report.n_certified,
            "n_certified_diverged": report.n_certified_diverged,
            "n_uncertified_converged": report.n_uncertified_converged,
            "fraction_conservative": report.fraction_conservative,
        },
        out / f"{cfg.name}_roa_report.json",
    )
    print(
        f"{cfg.name}: certified {report.n_certified}, violations "
        f"{report.n_certified_diverged}, conservative fraction "
        f"{report.fraction_conservative:.3f}"
    )
    return 0


def cmd_cases(args) -> int:
    suite = analysis.case_suite()
    out = _outdir(args)
    rows = []
    for cid in sorted(suite.cases):
        r = suite.cases[cid]
        rows.append(
            {
                "case": cid,
                "verdict": _verdict_dict(r.verdict),
                "min_zeta": r.min_zeta,
                "final_zeta": r.final_zeta,
                "zeta_at_clearing": r.zeta_at_clearing,
            }
        )
        io.write_trajectory_csv(
            r.trajectory, out / f"case{cid}_trajectory.csv", decimate=args.decimate
        )
    payload = {
        "cases": rows,
        "ranking_by_final_zeta": suite.ranking_by_final_zeta(),
        "ranking_by_settle_time": suite.ranking_by_settle_time(),
    }
    io.write_json(payload, out / "cases.json")
    for row in rows:
        v = row["verdict"]
        print(
            f"case {row['case']}: {v['kind']}"
            f"  min_zeta={row['min_zeta']:.4f} final_zeta={row['final_zeta']:.4f}"
        )
    print("ranking by settle time:", suite.ranking_by_settle_time())
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "index": cmd_index,
    "cct": cmd_cct,
    "roa": cmd_roa,
    "cases": cmd_cases,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CertificationViolation as exc:
        print(f"certification violation: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATION
    except (TssLabError, ValueError) as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    raise SystemExit(main())
