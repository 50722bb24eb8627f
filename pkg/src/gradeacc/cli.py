"""Command-line entry point.

Exit codes: 0 success, 2 configuration or input error, 3 safety violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from collections import Counter
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, build_run, load_config
from .dynamics import VehicleState
from .grade import InputError
from .ident import IdentificationError, Trace, fit_parameters, simulate_speed
from .metrics import compare_reports, performance_report
from .safeset import DEFAULT_DT_INT, compute_boundary, d_safe
from .scenarios import SafetyViolation, ScenarioLog, simulate_car_following, simulate_intersection, simulate_switching

EXIT_OK, EXIT_CONFIG, EXIT_UNSAFE = 0, 2, 3
BASELINE_NOTE = "baseline assumes zero grade in both the prediction model and the safe set"


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _config(args) -> dict:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["scenario"]["seed"] = args.seed
    if getattr(args, "baseline_no_grade", False):
        cfg["scenario"]["baseline_no_grade"] = True
    return cfg


def run_scenario(run) -> ScenarioLog:
    if run.kind == "intersection":
        lead_road = run.lead_road or run.scenario.profile
        return simulate_intersection(run.scenario, lead_road, run.radius, run.ego_center, run.lead_center)
    if run.kind == "switching":
        return simulate_switching(run.scenario)
    return simulate_car_following(run.scenario)


def cmd_simulate(args, out: Path) -> int:
    cfg = _config(args)
    run = build_run(cfg)
    code = EXIT_OK
    try:
        log = run_scenario(run)
    except SafetyViolation as exc:
        print(f"safety violation: {exc}", file=sys.stderr)
        log, code = exc.log, EXIT_UNSAFE
    log.to_csv(out / "log.csv")
    v_ref = run.scenario.mpc.v_ref
    report = performance_report(log, v_ref) if len(log) > 1 else None
    _write_json(
        out / "report.json",
        {
            "config": cfg,
            "seed": cfg["scenario"]["seed"],
            "report": report.to_dict() if report else None,
            "solver_status": dict(sorted(Counter(log.status).items())),
            "safety_violation": code == EXIT_UNSAFE,
            "note": BASELINE_NOTE if run.scenario.baseline_no_grade else "",
        },
    )
    if not args.no_plots:
        from .plotting import plot_log

        plot_log(log, out / "log.png", v_ref, title=run.kind)
    return code


def cmd_compare(args, out: Path) -> int:
    cfg = _config(args)
    cfg["scenario"]["baseline_no_grade"] = False
    run = build_run(cfg)
    # both runs go to full length so their sums are comparable
    sc = replace(run.scenario, stop_on_violation=False, stop_when_halted=False)
    logs = {}
    for name, baseline in (("with_grade", False), ("without_grade", True)):
        logs[name] = run_scenario(replace(run, scenario=replace(sc, baseline_no_grade=baseline)))
        logs[name].to_csv(out / f"{name}.csv")
    v_ref = sc.mpc.v_ref
    reports = {name: performance_report(log, v_ref) for name, log in logs.items()}
    table = compare_reports(reports["with_grade"], reports["without_grade"], logs["with_grade"], logs["without_grade"])
    with (out / "compare.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "with_grade", "without_grade"])
        for key, row in table.items():
            w.writerow([key, row["with_grade"], row["without_grade"]])
    _write_json(out / "compare.json", {"config": cfg, "seed": cfg["scenario"]["seed"], "table": table, "note": BASELINE_NOTE})
    if not args.no_plots:
        from .plotting import plot_comparison

        plot_comparison(logs["with_grade"], logs["without_grade"], out / "compare.png", v_ref)
    return EXIT_OK


def cmd_safeset(args, out: Path) -> int:
    cfg = _config(args)
    run = build_run(cfg)
    lt = cfg["lead_trajectory"]
    lead_profile = run.lead_road or run.scenario.profile
    sc = run.scenario
    p_ego = replace(sc.p_ego, F_brake_max=min(sc.p_ego.F_brake_max, -sc.mpc.u_min))
    b = compute_boundary(
        VehicleState(lt["s0"], lt["v0"]),
        lead_profile,
        sc.p_lead,
        p_ego,
        sc.mpc.v_max,
        sc.dt_int or DEFAULT_DT_INT,
        sc.l_min,
        ego_profile=sc.profile,
    )
    with (out / "boundary.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["v_e_mps", "d_min_m", "d_fit_m"])
        for v, d in zip(b.v_points, b.d_min_points):
            w.writerow([repr(float(v)), repr(float(d)), repr(float(d_safe(b, v)))])
    _write_json(
        out / "boundary.json",
        {
            "config": cfg,
            "seed": cfg["scenario"]["seed"],
            "coeffs": list(b.coeffs),
            "fit_residual_m": b.fit_residual,
            "degenerate": b.degenerate,
            "lead_stop_position_m": b.s_stop,
        },
    )
    if not args.no_plots:
        from .plotting import plot_boundary

        plot_boundary(b, out / "boundary.png")
    return EXIT_OK


def cmd_identify(args, out: Path) -> int:
    cfg = _config(args)
    run = build_run(cfg)
    traces = [Trace.from_csv(p) for p in args.traces]
    dts = {round(float(np.diff(tr.t).mean()), 9) for tr in traces}
    for tr in traces:
        steps = np.diff(tr.t)
        if np.any(np.abs(steps - steps[0]) > 1e-9 * max(1.0, steps[0])) or steps[0] <= 0:
            raise InputError("identification traces must have a uniform, increasing time column")
    if len(dts) != 1:
        raise InputError(f"all traces must share one sample time, got {sorted(dts)}")
    dt = dts.pop()
    p_init = run.scenario.p_ego
    try:
        fit = fit_parameters(traces, dt, p_init)
    except IdentificationError as exc:
        print(f"identification failed: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    p = fit.params
    _write_json(
        out / "identified.json",
        {
            "config": cfg,
            "seed": cfg["scenario"]["seed"],
            "params": {"m": p.m, "C_dA_f": fit.drag_area, "C_d": p.C_d, "A_f": p.A_f, "C_r": p.C_r},
            "residual_rms_mps": fit.residual,
            "iterations": fit.iterations,
            "converged": fit.converged,
        },
    )
    if not args.no_plots:
        from .plotting import plot_fit

        tr = traces[0]
        plot_fit(tr.t, tr.v, simulate_speed(p, tr.u, float(tr.v[0]), dt), out / "fit.png")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (defaults apply when omitted)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, default=None, help="override scenario.seed")
    common.add_argument("--no-plots", action="store_true", help="skip figure rendering")

    parser = argparse.ArgumentParser(prog="gradeacc", description="Grade-aware adaptive cruise control toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    sim = sub.add_parser("simulate", parents=[common], help="run one scenario, write log.csv and report.json")
    sim.add_argument("--baseline-no-grade", action="store_true", help="controller assumes zero grade")
    sub.add_parser("safeset", parents=[common], help="write the safe-distance boundary for the configured lead state")
    ident = sub.add_parser("identify", parents=[common], help="fit vehicle parameters to speed traces")
    ident.add_argument("traces", nargs="+", help="CSV files with header time_s,u_N,velocity_mps")
    sub.add_parser("compare", parents=[common], help="run with and without grade preview, side by side")
    return parser


COMMANDS = {"simulate": cmd_simulate, "safeset": cmd_safeset, "identify": cmd_identify, "compare": cmd_compare}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args, out)
    except (ConfigError, InputError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
