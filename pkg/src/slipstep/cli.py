"""Command-line front end.

Exit codes: 0 success, 1 controller-reported failure (slip, unrecoverable,
failed acceptance criterion), 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .friction_safety import export_region_boundaries
from .lip_core import ParameterError
from .simulator import (ConfigError, apply_overrides, config_from_dict,
                        export_trace, load_scenario, run, time_adjusted_steps,
                        transient_step_count)

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2
SWEEP_KEYS = ("mu", "h", "g", "mass", "L_star", "T_star")


class UsageError(Exception):
    pass


def _guard_outputs(paths, force: bool) -> None:
    existing = [str(p) for p in paths if Path(p).exists()]
    if existing and not force:
        raise UsageError(f"refusing to overwrite {', '.join(existing)} (use --force)")


def _load(path, overrides):
    if not Path(path).is_file():
        raise UsageError(f"config file not found: {path}")
    return load_scenario(path, overrides)


def cmd_run(args) -> int:
    config = _load(args.config, args.set)
    out = Path(args.out)
    _guard_outputs([out / "samples.csv", out / "steps.csv", out / "summary.json"], args.force)
    trace = run(config)
    export_trace(trace, out)
    print(f"outcome: {trace.outcome}; steps: {len(trace.records)}; "
          f"peak mu_r: {trace.peak_mu_r:.6f} (mu={config.params.mu})")
    if trace.outcome in ("converged", "running"):
        return EXIT_OK
    print(f"controller failure: {trace.outcome} (unrecoverable/slip)", file=sys.stderr)
    return EXIT_FAILURE


def cmd_regions(args) -> int:
    if args.config:
        config = _load(args.config, args.set)
    else:
        config = config_from_dict(apply_overrides({}, args.set))
    params = config.params
    T = params.T_star if args.T is None else args.T
    if args.grid < 2:
        raise UsageError("grid needs at least 2 points")
    _guard_outputs([args.out], args.force)
    export_region_boundaries(args.out, T, params, args.grid)
    print(f"wrote region boundaries for T={T} to {args.out}")
    return EXIT_OK


def _sweep_one(job):
    raw, key, value = job
    config = config_from_dict(apply_overrides(raw, [f"{key}={value}"]))
    trace = run(config)
    transient = transient_step_count(trace) if trace.outcome == "converged" else ""
    return {"value": value, "outcome": trace.outcome, "transient_steps": transient,
            "time_adjusted_steps": time_adjusted_steps(trace),
            "peak_mu_r": repr(trace.peak_mu_r)}


def cmd_sweep(args) -> int:
    import yaml

    if args.parameter not in SWEEP_KEYS:
        raise UsageError(f"sweep parameter must be one of {', '.join(SWEEP_KEYS)}")
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad value list {args.values!r}") from exc
    if not values:
        raise UsageError("empty value list")
    _load(args.config, args.set)  # validate once up front
    raw = apply_overrides(yaml.safe_load(Path(args.config).read_text()) or {}, args.set)
    _guard_outputs([args.out], args.force)
    jobs = [(raw, args.parameter, v) for v in values]
    with ProcessPoolExecutor(max_workers=min(len(jobs), args.workers)) as pool:
        rows = list(pool.map(_sweep_one, jobs))
    fields = ["value", "outcome", "transient_steps", "time_adjusted_steps", "peak_mu_r"]
    with open(args.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    print(f"{args.parameter:>8} {'outcome':>13} {'transient':>9} {'adjusted':>8} peak_mu_r")
    for r in rows:
        print(f"{r['value']:>8g} {r['outcome']:>13} {str(r['transient_steps']):>9} "
              f"{r['time_adjusted_steps']:>8} {float(r['peak_mu_r']):.6f}")
    failed = any(r["outcome"] in ("slipped", "unrecoverable") for r in rows)
    return EXIT_FAILURE if failed else EXIT_OK


def cmd_accept(args) -> int:
    from .acceptance import CRITERIA, format_line

    selection = sorted(CRITERIA)
    if args.only:
        selection = [int(k) for k in args.only.split(",")]
        unknown = [k for k in selection if k not in CRITERIA]
        if unknown:
            raise UsageError(f"unknown criteria {unknown}")
    if args.skip_6dof:
        selection = [k for k in selection if k != 12]
    ok = True
    for k in selection:
        result = CRITERIA[k]()
        ok &= result.passed
        print(format_line(result), flush=True)
    return EXIT_OK if ok else EXIT_FAILURE


def cmd_plan6dof(args) -> int:
    from .planar6dof.model import load_model
    from .planar6dof.scenario import (FullScenario, ScenarioAbort,
                                      export_joint_log, nominal_params,
                                      run_full_scenario)

    model = load_model(args.model) if args.model else load_model()
    params = nominal_params(model)
    out = Path(args.out)
    _guard_outputs([out / "joint_log.csv", out / "feasibility.json"], args.force)
    scenario = FullScenario(n_steps=args.steps,
                            push_step=args.push_step if args.push else None,
                            push_impulse=args.push)
    abort = None
    try:
        trace, report, joint_log = run_full_scenario(model, params, scenario)
    except ScenarioAbort as exc:
        abort = str(exc)
        trace, report, joint_log = exc.partial
    out.mkdir(parents=True, exist_ok=True)
    export_joint_log(joint_log, out / "joint_log.csv")
    summary = {"outcome": trace.outcome, "abort": abort, "feasibility": report.as_dict(),
               "steps": [{"index": r.index, "L": r.command.L, "T": r.command.T,
                          "mode": r.command.mode.value, "target": r.command.target.value,
                          "x0": r.state_after_events.x0,
                          "xdot0": r.state_after_events.xdot0} for r in trace.records]}
    (out / "feasibility.json").write_text(json.dumps(summary, indent=1, default=float) + "\n")
    for r in trace.records:
        print(f"step {r.index:2d}  L={r.command.L:+.4f}  T={r.command.T:.4f}  {r.command.mode.value}")
    if abort:
        print(f"aborted: {abort}", file=sys.stderr)
        return EXIT_FAILURE
    print(f"outcome: {trace.outcome}; peak mu_r {report.peak_mu_r:.4f}; "
          f"CoP [{report.cop_min:+.4f}, {report.cop_max:+.4f}] m")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slipstep", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        if config_required:
            p.add_argument("config")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a scenario value, e.g. mu=0.3")
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")

    p = sub.add_parser("run", help="run a LIP scenario and write its trace")
    common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("regions", help="export safe-region boundary polylines")
    p.add_argument("config", nargs="?")
    common(p, config_required=False)
    p.add_argument("--T", type=float, default=None, help="step time (default T*)")
    p.add_argument("--grid", type=int, default=101)
    p.add_argument("--out", required=True, help="CSV file")
    p.set_defaults(func=cmd_regions)

    p = sub.add_parser("sweep", help="run a scenario over several parameter values")
    common(p)
    p.add_argument("--parameter", required=True, choices=SWEEP_KEYS)
    p.add_argument("--values", required=True, help="comma-separated list")
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--out", required=True, help="CSV file")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("accept", help="run the acceptance checks")
    p.add_argument("--only", help="comma-separated criterion numbers")
    p.add_argument("--skip-6dof", action="store_true")
    p.set_defaults(func=cmd_accept)

    p = sub.add_parser("plan6dof", help="closed-loop walk of the 6-DoF model")
    p.add_argument("--model", help="model YAML file (default: bundled Nao-like model)")
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--push", type=float, default=0.0, help="impulse in kg m/s")
    p.add_argument("--push-step", type=int, default=4)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_plan6dof)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
