"""Command-line entry point.

Exit codes are the only machine contract: 0 all enforced monitors pass,
1 soft monitor failure, 2 scenario validation failure, 3 monitor hard
failure (non-finite state or controller singularity).  All human-readable
text goes to stderr.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import scenarios as bundled
from .pid import gain_bounds, q_matrix
from .scenario import ScenarioError, load_scenario
from .sim import MonitorHardFailure, run_scenario, write_monitor_report, write_trace_csv
from .systems import SYSTEM_NAMES

EXIT_OK = 0
EXIT_MONITOR_FAIL = 1
EXIT_VALIDATION = 2
EXIT_HARD_FAIL = 3


def _say(msg: str = "") -> None:
    print(msg, file=sys.stderr)


def _resolve_scenario(token: str) -> Path:
    path = Path(token)
    if path.exists():
        return path
    if token in bundled.all_names():
        return bundled.scenario_path(token)
    raise ScenarioError(f"scenario file not found: {token}")


def _execute(sc: dict, out_dir: Path, decimate: int):
    result = run_scenario(sc, decimate=decimate)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = out_dir / f"{result.label}_trace.csv"
    report_path = out_dir / f"{result.label}_report.txt"
    write_trace_csv(trace_path, result)
    write_monitor_report(report_path, result)
    return result, trace_path, report_path


def cmd_run(args) -> int:
    try:
        sc = load_scenario(_resolve_scenario(args.scenario), args.override)
        result, trace_path, report_path = _execute(sc, Path(args.out), args.decimate)
    except ScenarioError as exc:
        _say(f"scenario validation failed: {exc}")
        return EXIT_VALIDATION
    except MonitorHardFailure as exc:
        _say(f"monitor hard failure: {exc}")
        return EXIT_HARD_FAIL
    _say(f"trace:  {trace_path}")
    _say(f"report: {report_path}")
    for m in result.monitors:
        flag = "pass" if m.passed else "FAIL"
        _say(f"  {m.name:<28} {flag:<5} {m.detail}")
    _say(f"final tracking error: {result.final_error():.6e}")
    return EXIT_OK if result.passed else EXIT_MONITOR_FAIL


def cmd_verify_gains(args) -> int:
    try:
        sc = load_scenario(_resolve_scenario(args.scenario), args.override)
        from .sim import build_run

        run = build_run(sc)
        mu, lam = run.mu_lambda()
        g = sc["gains"]
        kappa = g.get("kappa")
        if kappa is None:
            kappa = 1.0 / mu
        elif not (kappa * mu >= 1.0 - 1e-6 and kappa * mu < 2.0):
            raise ScenarioError(
                f"gains.kappa={kappa:g} outside [1/mu, 2/mu) = [{1.0 / mu:g}, {2.0 / mu:g})"
            )
        bounds = gain_bounds(mu=mu, lam=lam, kappa=kappa, kd=g["kd"], ki=g["kI"])
    except ScenarioError as exc:
        _say(f"scenario validation failed: {exc}")
        return EXIT_VALIDATION
    from .pid import GainSet
    import numpy as np

    gains = GainSet(kp=g["kp"], kd=g["kd"], ki=g["kI"], kappa=kappa)
    q_eig = float(np.linalg.eigvalsh(q_matrix(gains, mu, kappa))[0])
    ki_ok = g["kI"] < bounds.ki_max
    kp_ok = g["kp"] > bounds.kp_min
    _say(f"scenario: {sc.get('label', sc['system'])}")
    _say(f"  mu = {mu:.6g}   lambda = {lam:.6g}   kappa = {kappa:.6g}   delta = {bounds.delta:.6g}")
    _say(f"  kI = {g['kI']:g}  vs  kI_max = {bounds.ki_max:.6g}   "
         f"[{'pass' if ki_ok else 'FAIL'}] margin {bounds.ki_max - g['kI']:+.6g}")
    _say(f"  kp = {g['kp']:g}  vs  kp_min = {bounds.kp_min:.6g}   "
         f"[{'pass' if kp_ok else 'FAIL'}] margin {g['kp'] - bounds.kp_min:+.6g}")
    _say(f"    (k1 = {bounds.k1:.6g}, k2 = {bounds.k2:.6g}, "
         f"curvature floor 2*kappa*kd^2 = {bounds.kp_curvature:.6g})")
    _say(f"  min eig(Q) = {q_eig:.6g}  [{'positive definite' if q_eig > 0 else 'NOT positive definite'}]")
    _say(f"  verdict: gains {'verified' if ki_ok and kp_ok else 'not verified'} for this scenario")
    return EXIT_OK


def _suite_worker(item):
    name, overrides, out, decimate = item
    try:
        sc = load_scenario(bundled.scenario_path(name), overrides)
        result, trace_path, report_path = _execute(sc, Path(out), decimate)
        worst = min(
            (m.worst_margin for m in result.monitors if m.enforced),
            default=float("inf"),
        )
        return (name, result.passed, result.final_error(), worst, "")
    except ScenarioError as exc:
        return (name, False, float("nan"), float("nan"), f"validation: {exc}")
    except MonitorHardFailure as exc:
        return (name, False, float("nan"), float("nan"), f"hard failure: {exc}")


def cmd_paper_suite(args) -> int:
    items = []
    for name in bundled.PAPER_SUITE:
        overrides = []
        for ov in args.override:
            if ":" in ov.split("=", 1)[0]:
                label, rest = ov.split(":", 1)
                if label == name:
                    overrides.append(rest)
            else:
                overrides.append(ov)
        items.append((name, tuple(overrides), args.out, args.decimate))

    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_suite_worker, items))
    else:
        rows = [_suite_worker(item) for item in items]

    _say(f"{'scenario':<26} {'status':<8} {'final_error':<14} {'worst_margin':<14} note")
    all_ok = True
    for name, ok, err, worst, note in rows:
        all_ok &= ok
        _say(f"{name:<26} {'pass' if ok else 'FAIL':<8} {err:<14.6e} {worst:<14.6e} {note}")
    _say(f"\nsuite: {sum(1 for r in rows if r[1])}/{len(rows)} scenarios passed")
    return EXIT_OK if all_ok else EXIT_MONITOR_FAIL


def _sweep_worker(item):
    scenario, overrides, out_dir, decimate, value = item
    try:
        sc = load_scenario(_resolve_scenario(scenario), overrides)
        result, _, _ = _execute(sc, Path(out_dir), decimate)
        return (value, result.passed, result.final_error(), "",
                EXIT_OK if result.passed else EXIT_MONITOR_FAIL)
    except ScenarioError as exc:
        return (value, False, float("nan"), str(exc), EXIT_VALIDATION)
    except MonitorHardFailure as exc:
        return (value, False, float("nan"), str(exc), EXIT_HARD_FAIL)


def cmd_sweep(args) -> int:
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        _say("sweep needs at least one value")
        return EXIT_VALIDATION
    items = []
    for value in values:
        overrides = tuple(list(args.override) + [f"{args.param}={value}"])
        tag = value.replace(".", "p").replace("-", "m")
        items.append((args.scenario, overrides,
                      str(Path(args.out) / f"{args.param}_{tag}"), args.decimate, value))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_worker, items))
    else:
        results = [_sweep_worker(item) for item in items]
    rows = [(v, ok, err, note) for v, ok, err, note, _ in results]
    code = max((c for *_, c in results), default=EXIT_OK)
    _say(f"sweep of {args.param}:")
    _say(f"{'value':<14} {'status':<8} {'final_error':<14} note")
    for value, ok, err, note in rows:
        _say(f"{value:<14} {'pass' if ok else 'FAIL':<8} {err:<14.6e} {note}")
    return code


def cmd_list_systems(args) -> int:
    _say("available plants:")
    for name in SYSTEM_NAMES:
        _say(f"  {name}")
    _say("bundled scenarios:")
    for name in bundled.all_names():
        _say(f"  {name}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geopid",
        description="Geometric PID control benchmarks on Lie groups",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, scenario=True):
        if scenario:
            p.add_argument("scenario", help="scenario file path or bundled scenario name")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--override", action="append", default=[],
                       metavar="KEY.PATH=VALUE", help="scenario override (repeatable)")
        p.add_argument("--decimate", type=int, default=1,
                       help="keep every Nth trace row")

    p_run = sub.add_parser("run", help="run one scenario, write trace and report")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_ver = sub.add_parser("verify-gains", help="check the gain conditions for a scenario")
    p_ver.add_argument("scenario")
    p_ver.add_argument("--override", action="append", default=[])
    p_ver.set_defaults(func=cmd_verify_gains)

    p_suite = sub.add_parser("paper-suite", help="run the nine bundled benchmark scenarios")
    common(p_suite, scenario=False)
    p_suite.add_argument("--jobs", type=int, default=1, help="parallel scenario workers")
    p_suite.set_defaults(func=cmd_paper_suite)

    p_sweep = sub.add_parser("sweep", help="run a scenario over a list of override values")
    common(p_sweep)
    p_sweep.add_argument("--param", required=True, help="dotted scenario key to sweep")
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.set_defaults(func=cmd_sweep)

    p_list = sub.add_parser("list-systems", help="enumerate plants and bundled scenarios")
    p_list.set_defaults(func=cmd_list_systems)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
