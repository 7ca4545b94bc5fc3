"""Command-line entry point.

Exit codes: 0 ok, 1 infeasible (or audit violations), 2 limits hit with no
incumbent, 3 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import __version__
from .audit import audit
from .baselines import InfeasibleTaskError
from .domain import Config, DomainError, ScheduleError
from .experiments import METHODS, ParetoPoint, SpecError, load_spec, pareto_sweep, run_suite, solve_method
from .generator import GenParams, generate
from .io import SchemaError, dumps, instance_to_dict, load_instance, load_schedule, schedule_to_dict
from .matheuristic import MatheuristicLimits, NoIncumbentError, run
from .report import (
    pareto_svg, pareto_to_csv, rows_from_csv, rows_to_csv, rows_to_json, soc_svg, write_text,
)
from .solver import SolveLimits

OK, INFEASIBLE, NO_INCUMBENT, USAGE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE, f"{self.prog}: error: {message}\n")


def _emit(text: str, out):
    if out:
        write_text(out, text)
    else:
        sys.stdout.write(text)


def _config(args) -> Config:
    kw = {}
    for name in ("lam", "mu", "rho", "P_S", "P_W"):
        v = getattr(args, name, None)
        if v is not None:
            kw[name] = v
    if args.gap is not None:
        kw["rel_gap"] = args.gap
    return Config(**kw)


def cmd_generate(args):
    params = GenParams(R=args.robots, K=args.tasks, M=args.chargers, horizon=args.horizon,
                       energy=tuple(args.energy), seed=args.seed if args.seed is not None else 0)
    _emit(dumps(instance_to_dict(generate(params))), args.out)
    return OK


def cmd_solve(args):
    inst = load_instance(args.instance)
    cfg = _config(args)
    tl = args.time_limit if args.time_limit is not None else 300.0
    gap = args.gap if args.gap is not None else 1e-6
    try:
        if args.method == "matheuristic":
            limits = MatheuristicLimits(iterations=args.iterations, time_limit=tl,
                                        master=SolveLimits(time_limit=tl, rel_gap=gap))
            mh = run(inst, cfg, limits, strategy=args.strategy)
            sched, status = mh.schedule, mh.stop_reason
            if args.log:
                write_text(args.log, mh.log_jsonl())
        else:
            sched, status = solve_method(inst, args.method, cfg, tl, gap)
    except (InfeasibleTaskError, NoIncumbentError) as exc:
        print(f"no schedule: {exc}", file=sys.stderr)
        return INFEASIBLE if isinstance(exc, InfeasibleTaskError) else NO_INCUMBENT
    if sched is None:
        print(f"no schedule (solver status {status})", file=sys.stderr)
        return INFEASIBLE if status == "infeasible" else NO_INCUMBENT
    _emit(dumps(schedule_to_dict(sched)), args.out)
    rep = audit(inst, sched, cfg.feas_tol, cfg)
    print(f"method {args.method}: {status}", file=sys.stderr)
    print(rep.summary(), file=sys.stderr)
    return OK if rep.ok else INFEASIBLE


def cmd_validate(args):
    inst = load_instance(args.instance)
    sched = load_schedule(args.schedule)
    cfg = _config(args)
    rep = audit(inst, sched, args.tolerance, cfg)
    _emit(json.dumps(rep.to_dict(), indent=1) + "\n" if args.json else rep.summary() + "\n", args.out)
    return OK if rep.ok else INFEASIBLE


def cmd_sweep(args):
    inst = load_instance(args.instance)
    cfg = _config(args)
    tl = args.time_limit if args.time_limit is not None else 60.0
    points = pareto_sweep(inst, args.mu_values, cfg, tl, args.method)
    _emit(pareto_to_csv(points), args.out)
    if args.svg:
        write_text(args.svg, pareto_svg(points))
    return OK


def cmd_suite(args):
    spec = load_spec(args.spec)
    if args.seed is not None:
        spec.seeds = [args.seed]
    if args.time_limit is not None:
        spec.time_limit = args.time_limit
    if args.gap is not None:
        spec.gap = args.gap

    def progress(row):
        if not args.quiet:
            print(f"{row.instance} {row.method:<12} {row.ablation:<20} {row.status:<7} "
                  f"obj={row.objective:.6g} t={row.solve_seconds:.2f}s", file=sys.stderr)

    rows = run_suite(spec, progress)
    _emit(rows_to_csv(rows), args.out or spec.out)
    if args.json:
        write_text(args.json, rows_to_json(rows))
    return OK


def cmd_report(args):
    path = Path(args.input)
    text = path.read_text()
    if path.suffix == ".json":
        if args.instance is None:
            raise UsageError("a schedule report needs --instance")
        if args.format != "svg":
            raise UsageError("schedules are reported as svg only")
        _emit(soc_svg(load_instance(args.instance), load_schedule(path)), args.out)
        return OK
    header = text.split("\n", 1)[0].split(",")
    if header[0] == "mu":
        pts = [ParetoPoint(float(r["mu"]), float(r["total_degradation"]), float(r["total_tardiness"]),
                           float(r["objective"])) for r in csv.DictReader(io.StringIO(text))]
        out = {"csv": pareto_to_csv, "svg": pareto_svg,
               "json": lambda p: json.dumps([pt.__dict__ for pt in p], indent=1) + "\n"}[args.format](pts)
        _emit(out, args.out)
        return OK
    rows = rows_from_csv(text)
    if args.format == "csv":
        _emit(rows_to_csv(rows, include_wall_time=not args.no_wall_time), args.out)
    elif args.format == "json":
        _emit(rows_to_json(rows), args.out)
    else:
        pts = [ParetoPoint(r.mu, r.total_degradation, r.total_tardiness, r.objective) for r in rows if r.valid]
        _emit(pareto_svg(pts), args.out)
    return OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed")
    common.add_argument("--time-limit", type=float, default=None, help="seconds per solve")
    common.add_argument("--gap", type=float, default=None, help="relative optimality gap")
    common.add_argument("--out", default=None, help="output file (default stdout)")
    weights = argparse.ArgumentParser(add_help=False)
    weights.add_argument("--lam", type=float, default=None, help="queueing weight")
    weights.add_argument("--mu", type=float, default=None, help="tardiness weight")
    weights.add_argument("--rho", type=float, default=None, help="max-degradation weight")
    weights.add_argument("--P-S", dest="P_S", type=int, default=None, help="SOC partitions")
    weights.add_argument("--P-W", dest="P_W", type=int, default=None, help="idle-time partitions")

    p = _Parser(prog="amrfleet", description="Degradation-aware AMR fleet scheduling.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", parents=[common], help="generate a random instance")
    g.add_argument("-R", "--robots", type=int, default=2)
    g.add_argument("-K", "--tasks", type=int, default=6)
    g.add_argument("-M", "--chargers", type=int, default=1)
    g.add_argument("--horizon", type=float, default=480.0)
    g.add_argument("--energy", type=float, nargs=2, default=(0.02, 0.08), metavar=("LO", "HI"))
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", parents=[common, weights], help="solve an instance")
    s.add_argument("instance")
    s.add_argument("--method", choices=METHODS, default="matheuristic")
    s.add_argument("--strategy", choices=("enumerate", "milp"), default="enumerate",
                   help="matheuristic subproblem strategy")
    s.add_argument("--iterations", type=int, default=200, help="matheuristic iteration limit")
    s.add_argument("--log", default=None, help="matheuristic iteration log (JSON lines)")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("validate", parents=[common, weights], help="audit a schedule")
    v.add_argument("schedule")
    v.add_argument("--instance", required=True)
    v.add_argument("--tolerance", type=float, default=1e-6)
    v.add_argument("--json", action="store_true", help="JSON report instead of text")
    v.set_defaults(func=cmd_validate)

    w = sub.add_parser("sweep", parents=[common, weights], help="tardiness-weight sweep")
    w.add_argument("instance")
    w.add_argument("--mu-values", type=float, nargs="+", default=[0.0, 0.1, 1.0, 10.0])
    w.add_argument("--method", choices=METHODS, default="matheuristic")
    w.add_argument("--svg", default=None, help="also write a scatter plot")
    w.set_defaults(func=cmd_sweep)

    u = sub.add_parser("suite", parents=[common], help="run an experiment spec (JSON)")
    u.add_argument("spec")
    u.add_argument("--json", default=None, help="also write rows as JSON")
    u.add_argument("--quiet", action="store_true")
    u.set_defaults(func=cmd_suite)

    r = sub.add_parser("report", parents=[common], help="convert or plot results")
    r.add_argument("input", help="suite CSV, sweep CSV, or schedule JSON")
    r.add_argument("--format", choices=("csv", "json", "svg"), default="csv")
    r.add_argument("--instance", default=None, help="instance for schedule SOC plots")
    r.add_argument("--no-wall-time", action="store_true", help="drop wall-time columns")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, SpecError, SchemaError, FileNotFoundError, DomainError) as exc:
        print(f"amrfleet: error: {exc}", file=sys.stderr)
        return USAGE
    except ScheduleError as exc:
        print(f"amrfleet: malformed schedule: {exc}", file=sys.stderr)
        return INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
