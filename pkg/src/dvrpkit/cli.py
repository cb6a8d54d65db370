"""Command line entry point: ``dvrp run|report|scaling|convert|generate``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import bench
from .instance_io import (convert_tsplib, parse_kilby, random_raw_instance, serialize_instance)
from .pso import PsoParams
from .simulator import ALGORITHMS, default_config


def _resolve_instance(name: str) -> str:
    p = Path(name)
    if p.is_file():
        return str(p)
    found = bench.find_benchmark(name)
    if found is None:
        raise SystemExit(f"instance {name!r} not found (looked in {bench.benchmark_dir()})")
    return str(found)


def cmd_run(args) -> int:
    overrides = {"T_CO": args.cutoff}
    if args.slices is not None:
        overrides["time_slices"] = args.slices
    if args.workers is not None:
        overrides["workers"] = args.workers
    configs = []
    for algo in args.algo:
        cfg = default_config(algo, **overrides)
        if cfg.pso is not None and (args.swarm or args.iters):
            cfg = default_config(algo, **overrides, pso=PsoParams(args.swarm or cfg.pso.swarm_size,
                                                                 args.iters or cfg.pso.iterations))
        configs.append(cfg)
    spec = bench.ExperimentSpec([_resolve_instance(n) for n in args.instance], configs, args.reps,
                                args.seed, args.out, args.cutoff, args.parallel)
    rows = bench.run_experiment(spec)
    for err in spec.errors:
        print(f"error: {err}", file=sys.stderr)
    for r in rows:
        status = "ok" if r.feasible else "INFEASIBLE"
        print(f"{r.instance} {r.config_label} rep={r.repetition} seed={r.seed} "
              f"cost={r.cost:.2f} time={r.wall_time:.2f}s {status}")
    if rows:
        print()
        print(bench.report(rows, reference=not args.no_reference)[0], end="")
    return 1 if spec.errors or any(not r.feasible for r in rows) else 0


def cmd_report(args) -> int:
    rows = [r for path in args.inp for r in bench.read_csv(path)]
    text, csv_text = bench.report(rows, reference=not args.no_reference)
    print(text, end="")
    if args.csv:
        Path(args.csv).write_text(csv_text, encoding="utf-8")
    return 0


def cmd_scaling(args) -> int:
    rows = [r for path in args.inp for r in bench.read_csv(path)]
    if args.algo:
        rows = [r for r in rows if r.algorithm == args.algo]
    fit = bench.fit_scaling(rows)
    for m, t in zip(fit.sizes, fit.mean_times):
        print(f"m={m} mean_time={t:.4f}s")
    print(f"slope={fit.slope:.6g} intercept={fit.intercept:.6g} r2={fit.r2:.4f}")
    return 0


def cmd_convert(args) -> int:
    if args.kilby:
        raw = parse_kilby(Path(args.kilby).read_text(encoding="utf-8"), source=args.kilby)
    else:
        if not (args.tsplib and args.times):
            raise SystemExit("convert needs --kilby FILE or both --tsplib and --times")
        raw = convert_tsplib(Path(args.tsplib).read_text(encoding="utf-8"),
                             Path(args.times).read_text(encoding="utf-8"))
    text = serialize_instance(raw)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_generate(args) -> int:
    raw = random_raw_instance(args.requests, args.seed, clustered=args.clustered)
    text = serialize_instance(raw)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dvrp", description="Dynamic vehicle routing experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate working days and print min/avg results")
    r.add_argument("--instance", nargs="+", required=True, help="instance files or benchmark names")
    r.add_argument("--algo", nargs="+", default=["mctree"],
                   help=f"one or more of {', '.join(ALGORITHMS)} ('-' or '+' also accepted)")
    r.add_argument("--slices", type=int, help="time slices (default per algorithm)")
    r.add_argument("--workers", type=int, help="parallel portfolio size (default 8)")
    r.add_argument("--swarm", type=int, help="PSO swarm size")
    r.add_argument("--iters", type=int, help="PSO iterations")
    r.add_argument("--cutoff", type=float, default=0.5, help="cut-off fraction T_CO")
    r.add_argument("--reps", type=int, default=1)
    r.add_argument("--seed", type=int, default=0, help="base seed, repetition k uses seed+k")
    r.add_argument("--parallel", type=int, default=1, help="runs executed concurrently")
    r.add_argument("--out", help="write per-run rows to this CSV")
    r.add_argument("--no-reference", action="store_true", help="omit published reference columns")
    r.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="min/avg table from result CSVs")
    rep.add_argument("--in", dest="inp", nargs="+", required=True)
    rep.add_argument("--csv", help="also write the aggregate table as CSV")
    rep.add_argument("--no-reference", action="store_true")
    rep.set_defaults(func=cmd_report)

    sc = sub.add_parser("scaling", help="fit mean wall time against m^2 ln m")
    sc.add_argument("--in", dest="inp", nargs="+", required=True)
    sc.add_argument("--algo", help="restrict to one algorithm")
    sc.set_defaults(func=cmd_scaling)

    cv = sub.add_parser("convert", help="convert TSPLIB + times table or a Kilby file to the canonical format")
    cv.add_argument("--tsplib")
    cv.add_argument("--times")
    cv.add_argument("--kilby")
    cv.add_argument("--out")
    cv.set_defaults(func=cmd_convert)

    g = sub.add_parser("generate", help="write a synthetic instance")
    g.add_argument("--requests", type=int, default=50)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--clustered", action="store_true")
    g.add_argument("--out")
    g.set_defaults(func=cmd_generate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
