"""Command-line front end: solve problem files or builtins, run benchmark
sweeps, list builtins and the option surface.

Summary output is machine-parseable key=value lines (floats through repr, so
identical invocations produce bitwise-identical bytes), followed by the
crossover iteration table when requested.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import bench as bench_mod
from .errors import MpccError, OptionError, ParseError
from .options import parse_cli_value, registry_for, resolve
from .penalty import PenaltySolver
from .relax import RelaxationSolver
from .result import LOG_FIELDS

ENV_OPTION_FILE = "MPCCKIT_OPTIONS"


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_log(records, path):
    with open(path, "w") as fh:
        fh.write(",".join(LOG_FIELDS) + "\n")
        for rec in records:
            fh.write(",".join(_fmt(v) for v in rec.as_row()) + "\n")


def _load_option_file(algorithm):
    path = os.environ.get(ENV_OPTION_FILE)
    if not path:
        return {}
    with open(path) as fh:
        doc = json.load(fh)
    registry = registry_for(algorithm)
    return {k: v for k, v in doc.items() if k in registry}


def _parse_sets(algorithm, pairs):
    overrides = {}
    for kv in pairs or []:
        if "=" not in kv:
            raise OptionError(f"--set expects key=value, got {kv!r}")
        key, raw = kv.split("=", 1)
        overrides[key] = parse_cli_value(algorithm, key, raw)
    return overrides


def cmd_solve(args) -> int:
    algorithm = args.algorithm
    overrides = _load_option_file(algorithm)
    overrides.update(_parse_sets(algorithm, args.set))
    if args.tol is not None:
        overrides["tol"] = args.tol
    if args.max_iter is not None:
        overrides["max_iter"] = args.max_iter
    options = resolve(algorithm, overrides)

    if args.builtin:
        problem = bench_mod.builtin(args.builtin)
    else:
        problem = bench_mod.load_problem(args.file)

    solver = (RelaxationSolver if algorithm == "relaxation"
              else PenaltySolver)(**overrides)
    result = solver.solve(problem)
    lines = ["# option overrides: "
             + ",".join(f"{k}={_fmt(v)}" for k, v in sorted(overrides.items()))]

    table = ""
    if args.crossover:
        from .crossover import crossover_from_result
        final = crossover_from_result(result, problem)
        lines += [f"phase1_status={result.status}",
                  f"phase1_objective={result.objective!r}"]
        result = final
        if "\n" in result.message:
            table = result.message
    lines += result.summary_lines()
    if table:
        lines += ["", table]

    text = "\n".join(lines) + "\n"
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    sys.stdout.write(text)
    if args.log:
        write_log(result.records, args.log)
    return 0 if result.success else 1


def cmd_list(args) -> int:
    out = []
    if args.dump_problem:
        entry = bench_mod.builtin_entry(args.dump_problem)
        sys.stdout.write(json.dumps(bench_mod.serialize_qpcc(entry.data),
                                    indent=1) + "\n")
        return 0
    if not args.options or args.builtins:
        out.append("builtin problems:")
        for name in bench_mod.builtin_names():
            entry = bench_mod.builtin_entry(name)
            out.append(f"  {name:22s} f* = {entry.f_opt!r}")
    if not args.builtins or args.options:
        for algorithm in ("relaxation", "penalty"):
            out.append(f"{algorithm} options:")
            registry = registry_for(algorithm)
            for name in sorted(registry):
                spec = registry[name]
                out.append(f"  {name:28s} default={_fmt(spec.default):14s} "
                           f"{spec.doc}")
    sys.stdout.write("\n".join(out) + "\n")
    return 0


def cmd_bench(args) -> int:
    problems = args.problems or bench_mod.builtin_names()
    solvers = []
    for spec in args.solvers or ["relaxation", "penalty"]:
        parts = spec.split(":")
        algorithm = parts[0]
        if algorithm not in ("relaxation", "penalty"):
            raise OptionError(f"unknown algorithm {algorithm!r}")
        overrides = {}
        for kv in parts[1:]:
            key, raw = kv.split("=", 1)
            overrides[key] = parse_cli_value(algorithm, key, raw)
        name = spec.replace(":", "_") if len(parts) > 1 else algorithm
        solvers.append((name, algorithm, overrides))
    records = bench_mod.run_bench(solvers, problems, timeout=args.timeout,
                                  workers=args.workers)
    lines = ["solver,problem,status,objective,wall_time,iterations,"
             "factorizations,residual,comp_residual"]
    for r in records:
        lines.append(",".join([
            r.solver, r.problem, r.status, repr(r.objective),
            f"{r.wall_time:.6f}", str(r.iterations), str(r.factorizations),
            repr(r.residual), repr(r.comp_residual)]))
    text = "\n".join(lines) + "\n"
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.profile:
        curves, notes = bench_mod.performance_profile(records, metric=args.metric)
        plines = ["solver,theta,fraction"]
        for solver, pts in sorted(curves.items()):
            for theta, frac in pts:
                plines.append(f"{solver},{theta!r},{frac!r}")
        ptext = "\n".join(plines) + "\n"
        with open(args.profile, "w") as fh:
            fh.write(ptext)
        for note in notes:
            sys.stderr.write(note + "\n")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mpcckit",
        description="Interior-point and active-set solvers for MPCCs.")
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="solve a problem file or builtin")
    src = ps.add_mutually_exclusive_group(required=True)
    src.add_argument("--builtin", help="builtin problem name")
    src.add_argument("--file", help="QPCC problem file (JSON)")
    ps.add_argument("--algorithm", choices=("relaxation", "penalty"),
                    default="relaxation")
    ps.add_argument("--tol", type=float, default=None)
    ps.add_argument("--max-iter", type=int, default=None)
    ps.add_argument("--crossover", action="store_true",
                    help="chain into the LPEC crossover after the solve")
    ps.add_argument("--set", action="append", metavar="KEY=VALUE",
                    help="option override (repeatable)")
    ps.add_argument("--log", help="write the per-iteration CSV log here")
    ps.add_argument("--output", help="also write the summary to this path")
    ps.set_defaults(func=cmd_solve)

    pl = sub.add_parser("list", help="list builtins and options")
    pl.add_argument("--options", action="store_true")
    pl.add_argument("--builtins", action="store_true")
    pl.add_argument("--dump-problem", metavar="NAME",
                    help="print a builtin as a problem file")
    pl.set_defaults(func=cmd_list)

    pb = sub.add_parser("bench", help="run a benchmark sweep")
    pb.add_argument("problems", nargs="*",
                    help="builtin names (default: all)")
    pb.add_argument("--solvers", action="append",
                    metavar="ALGORITHM[:k=v...]",
                    help="solver spec (repeatable)")
    pb.add_argument("--timeout", type=float, default=None)
    pb.add_argument("--workers", type=int, default=1)
    pb.add_argument("--output", help="records CSV path")
    pb.add_argument("--profile", help="profile-points CSV path")
    pb.add_argument("--metric", choices=("iterations", "time"),
                    default="iterations")
    pb.set_defaults(func=cmd_bench)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (OptionError, ParseError, KeyError, FileNotFoundError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except MpccError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


def main():
    raise SystemExit(run())


if __name__ == "__main__":
    main()
