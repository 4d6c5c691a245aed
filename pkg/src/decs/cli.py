"""Command line: ``decs-bench bench|sweep|verify|plot``."""
from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional

from . import ALGORITHMS
from .bench import BenchConfig, BenchError, parse_sweep_file, plot_csv, run_benchmark, sweep
from .verify import HistoryError, check_linearizable, check_pool, read_history


def _knobs(args) -> dict:
    names = ("collision_width", "wait_spins", "yield_after", "bounded_await_spins")
    return {n: getattr(args, n) for n in names if getattr(args, n, None) is not None}


def cmd_bench(args) -> int:
    cfg = BenchConfig(
        algo=args.algo,
        threads=args.threads,
        duration_ms=args.duration_ms,
        push_ratio=args.push_ratio,
        prepopulate=args.prepopulate,
        runs=args.runs,
        seed=args.seed,
        output=args.out,
        warmup_ms=args.warmup_ms,
        max_prepopulate=args.max_prepopulate,
        interleave=args.interleave,
        knobs=_knobs(args),
    )
    try:
        report = run_benchmark(cfg)
    except BenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"{'run':>4} {'ops':>10} {'ops/s':>12} {'central%':>9} {'elim%':>7} {'comb%':>7}")
    for res in report.runs + [report.avg]:
        print(
            f"{res.run!s:>4} {res.ops_total:>10.0f} {res.throughput_ops_per_s:>12.0f} "
            f"{res.central_pct:>9.2f} {res.elim_pct:>7.2f} {res.comb_pct:>7.2f}"
        )
    for flag in report.flags:
        print(f"warning: {flag} (prepopulation was insufficient)", file=sys.stderr)
    if args.out is None:
        return 0
    print(f"wrote {args.out}")
    return 0


def cmd_sweep(args) -> int:
    try:
        cfg = parse_sweep_file(args.config)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    result = sweep(cfg, args.out)
    print(f"{len(result.reports)} point(s) done, {len(result.failures)} failed; results in {result.csv_path}")
    for path in result.plot_paths:
        print(f"plot: {path}")
    for point, msg in result.failures:
        print(f"failed: {point.algo} threads={point.threads} push_ratio={point.push_ratio}: {msg}", file=sys.stderr)
    return 1 if result.failures else 0


def cmd_verify(args) -> int:
    try:
        history = read_history(args.history)
        if args.mode == "pool":
            verdict = check_pool(history)
        else:
            verdict = check_linearizable(history, bound=args.bound)
    except (OSError, HistoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if verdict.ok:
        print(f"PASS ({args.mode})")
        return 0
    req = f" requirement {verdict.requirement}" if verdict.requirement else ""
    print(f"FAIL ({args.mode}{req}): {verdict.message}")
    return 1


def cmd_plot(args) -> int:
    for path in plot_csv(args.csv, args.out):
        print(path)
    return 0


def _add_knobs(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("algorithm knobs")
    g.add_argument("--collision-width", type=int, help="slots in the collision array (default: threads)")
    g.add_argument("--wait-spins", type=int, help="checks a collider makes while waiting to be collided with")
    g.add_argument("--yield-after", type=int, help="status checks before a waiter starts yielding")
    g.add_argument("--bounded-await-spins", type=int, help="nb-decs: checks before a waiter cancels")
    g.add_argument(
        "--interleave",
        action="store_true",
        help="emulate parallel hardware by passing control between threads at shared-memory steps",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="decs-bench", description="Elimination-combining stack benchmarks and checkers.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log each run")
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="timed runs of one configuration")
    b.add_argument("--algo", choices=sorted(ALGORITHMS), default="decs")
    b.add_argument("--threads", type=int, default=4)
    b.add_argument("--push-ratio", type=float, default=0.5)
    b.add_argument("--duration-ms", type=int, default=1000)
    b.add_argument("--runs", type=int, default=3)
    b.add_argument("--prepopulate", type=int, help="cells preloaded (default threads x duration_ms x 100, capped)")
    b.add_argument("--max-prepopulate", type=int, default=BenchConfig.max_prepopulate, help="cap on the default prepopulation")
    b.add_argument("--warmup-ms", type=int, default=100)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", help="CSV file to write")
    _add_knobs(b)
    b.set_defaults(func=cmd_bench)

    s = sub.add_parser("sweep", help="run a grid read from a key = value file")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True, help="directory for results.csv and plots")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="check a recorded history file")
    v.add_argument("--history", required=True)
    v.add_argument("--mode", choices=("pool", "linearizable"), default="pool")
    v.add_argument("--bound", type=int, default=12, help="largest history the linearizability search accepts")
    v.set_defaults(func=cmd_verify)

    pl = sub.add_parser("plot", help="draw throughput and collision plots from a results CSV")
    pl.add_argument("--csv", required=True)
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_plot)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
