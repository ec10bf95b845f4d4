"""Command line entry point: ``run``, ``validate`` and ``tune``.

    mfcair run --plan PLAN [--jobs N] [--out-dir D] [--no-plots]
    mfcair validate --plan PLAN
    mfcair tune --params FILE --profile FILE [--reference constant|polynomial]

``--plan default`` selects the plan shipped with the package. The output
directory defaults to ``$MFCAIR_OUT_DIR`` or ``./mfcair-out``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import DEFAULT_PLAN, ConfigError, ExperimentPlan, RunSpec, data_path, load_params, load_plan, load_profile
from .params import apply_uncertainties, derive_constants
from .report import atomic_write_text, plot_group, summary_csv, summary_text, write_trace
from .scenario import ReferenceSpec
from .sim import RunAborted, run_closed_loop
from .tuning import tune

log = logging.getLogger("mfcair")

OUT_DIR_ENV = "MFCAIR_OUT_DIR"


def _plan_path(value: str) -> Path:
    return data_path(DEFAULT_PLAN) if value == "default" else Path(value)


def execute_run(spec: RunSpec):
    """Run one plan entry. Returns ``(trace, metrics, error_message)``."""
    params = spec.params
    if spec.uncertainty is not None:
        params = apply_uncertainties(params, spec.uncertainty)
    try:
        c = derive_constants(params)
        trace, metrics = run_closed_loop(c, spec.profile, spec.reference, spec.controller, spec.sim)
    except RunAborted as exc:
        return exc.trace, None, str(exc)
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        return None, None, f"{type(exc).__name__}: {exc}"
    return trace, metrics, None


def run_plan(plan: ExperimentPlan, out_dir, jobs: int = 1, plots: bool = True) -> int:
    """Execute every run, write traces, summaries and figures. Returns the exit status."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(execute_run, plan.runs))
    else:
        outcomes = [execute_run(spec) for spec in plan.runs]

    results = []
    by_group: dict[str, dict] = {}
    for spec, (trace, metrics, error) in zip(plan.runs, outcomes):
        if trace is not None:
            write_trace(trace, out_dir / spec.output)
        if error is not None:
            log.error("run %s aborted: %s", spec.name, error)
        else:
            by_group.setdefault(spec.group, {})[spec.case] = trace
            log.info("run %s done: lambda_min=%.3f max|e|=%.3f", spec.name,
                     metrics.lambda_min, metrics.max_abs_error)
        results.append((spec, metrics, error))

    atomic_write_text(out_dir / "summary.csv", summary_csv(results))
    text = summary_text(results)
    atomic_write_text(out_dir / "summary.txt", text)
    print(text)
    if plots:
        for group, traces in by_group.items():
            plot_group(group, traces, out_dir / "figures" / f"{group}.png")
    return 1 if any(err is not None for _, _, err in results) else 0


def _cmd_run(args) -> int:
    plan = load_plan(_plan_path(args.plan))
    out_dir = args.out_dir or os.environ.get(OUT_DIR_ENV) or "mfcair-out"
    return run_plan(plan, out_dir, jobs=args.jobs, plots=not args.no_plots)


def _cmd_validate(args) -> int:
    plan = load_plan(_plan_path(args.plan))
    for spec in plan.runs:
        unc = spec.uncertainty_file.name if spec.uncertainty_file else "none"
        print(f"{spec.name}: params={spec.params_file.name} uncertainty={unc} "
              f"profile={spec.profile_file.name} reference={spec.reference.mode} -> {spec.output}")
    print(f"plan OK: {len(plan)} runs")
    return 0


def _cmd_tune(args) -> int:
    params = load_params(args.params)
    profile = load_profile(args.profile)
    reference = ReferenceSpec(args.reference, args.lambda_const)
    report = tune(derive_constants(params), profile, reference, ts=args.ts,
                  window_samples=args.window, settle_time=args.settle_time, band=args.band)
    print(f"{'xi[A]':>8} {'lambda*':>8} {'u_trim[A]':>10} {'peak rate/A':>12} {'static/A':>10}")
    for p in report.points:
        print(f"{p.xi:8.1f} {p.lambda_ref:8.4f} {p.u_trim:10.2f} {p.input_gain:12.5f} {p.static_gain:10.5f}")
    print(f"largest relative jump after a load step: {report.max_jump:.3f}")
    print(f"alpha = {report.alpha:g}\nkp = {report.kp:g}\ntau = {report.tau:g}\nts = {report.ts:g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfcair", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute an experiment plan")
    p.add_argument("--plan", required=True, help="plan file, or 'default'")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--out-dir", default=None)
    p.add_argument("--no-plots", action="store_true", help="skip the PNG figures")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("validate", help="check a plan without running it")
    p.add_argument("--plan", required=True)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("tune", help="size alpha and kp from open-loop step tests")
    p.add_argument("--params", required=True)
    p.add_argument("--profile", required=True)
    p.add_argument("--reference", choices=("constant", "polynomial"), default="constant")
    p.add_argument("--lambda-const", type=float, default=2.2)
    p.add_argument("--ts", type=float, default=0.01)
    p.add_argument("--window", type=int, default=30, help="estimation window in samples")
    p.add_argument("--settle-time", type=float, default=3.0, help="target restoration time, s")
    p.add_argument("--band", type=float, default=0.02)
    p.set_defaults(func=_cmd_tune)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
