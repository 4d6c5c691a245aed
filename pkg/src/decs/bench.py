"""Throughput benchmark: timed runs, collision attribution and CSV output.

Each run builds a fresh stack, prepopulates it, and lets ``threads`` workers
hammer it until a stop flag is raised. Every worker draws its push/pop mix
from its own seeded generator, so the op-kind sequence is reproducible even
though the timing is not.
"""
from __future__ import annotations

import csv
import logging
import os
import random
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

from . import ALGORITHMS, make_stack
from .core import EMPTY

log = logging.getLogger(__name__)

CSV_HEADER = [
    "algo",
    "threads",
    "push_ratio",
    "run",
    "duration_ms",
    "ops_total",
    "throughput_ops_per_s",
    "central_pct",
    "elim_pct",
    "comb_pct",
]

WATCHDOG_ENV = "DECS_WATCHDOG_S"
DEFAULT_THREAD_GRID = (1, 2, 4, 8, 16, 32, 64, 128)
DEFAULT_MAX_PREPOPULATE = 1_000_000
CHECK_EVERY = 64


class BenchError(RuntimeError):
    """A run was aborted: a worker failed, could not start, or the watchdog fired."""


@dataclass(frozen=True)
class BenchConfig:
    algo: str = "decs"
    threads: int = 1
    duration_ms: int = 1000
    push_ratio: float = 0.5
    prepopulate: Optional[int] = None
    runs: int = 3
    seed: int = 0
    output: Optional[str] = None
    warmup_ms: int = 100
    max_prepopulate: int = DEFAULT_MAX_PREPOPULATE
    interleave: bool = False
    knobs: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.algo not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algo!r}; expected one of {sorted(ALGORITHMS)}")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if not 0.0 <= self.push_ratio <= 1.0:
            raise ValueError("push_ratio must lie in [0, 1]")
        if self.duration_ms <= 0:
            raise ValueError("duration_ms must be positive")
        if self.prepopulate is not None and self.prepopulate < 0:
            raise ValueError("prepopulate must be >= 0")

    @property
    def cells(self) -> int:
        """Cells to preload: the explicit value, or threads x duration_ms x 100 up to the cap."""
        if self.prepopulate is not None:
            return self.prepopulate
        return min(self.threads * self.duration_ms * 100, self.max_prepopulate)


@dataclass
class RunResult:
    run: Union[int, str]
    duration_ms: float
    ops_total: Union[int, float]
    throughput_ops_per_s: float
    central_pct: float
    elim_pct: float
    comb_pct: float
    central_ops: int = field(default=0, compare=False)
    elim_ops: int = field(default=0, compare=False)
    comb_ops: int = field(default=0, compare=False)
    empty_pops: int = field(default=0, compare=False)
    await_timeouts: int = field(default=0, compare=False)


@dataclass
class BenchReport:
    algo: str
    threads: int
    push_ratio: float
    runs: List[RunResult] = field(default_factory=list)
    flags: List[str] = field(default_factory=list, compare=False)

    @property
    def avg(self) -> Optional[RunResult]:
        if not self.runs:
            return None
        n = len(self.runs)

        def mean(attr):
            return sum(getattr(r, attr) for r in self.runs) / n

        return RunResult(
            "avg",
            mean("duration_ms"),
            mean("ops_total"),
            mean("throughput_ops_per_s"),
            mean("central_pct"),
            mean("elim_pct"),
            mean("comb_pct"),
        )

    @property
    def sufficient_prepopulation(self) -> bool:
        return not any(f.startswith("empty-pops") for f in self.flags)


def op_stream(seed: int, run: int, worker: int, push_ratio: float) -> Iterator[bool]:
    """Endless op kinds for one worker: True means push."""
    rng = random.Random(f"bench:{seed}:{run}:{worker}")
    rand = rng.random
    while True:
        yield rand() < push_ratio


def _watchdog_seconds(duration_ms: int) -> float:
    raw = os.environ.get(WATCHDOG_ENV)
    if raw:
        return float(raw)
    return 60.0 + duration_ms / 1000.0


def _percentages(central: int, elim: int, comb: int) -> Tuple[float, float, float]:
    total = central + elim + comb
    if total == 0:
        return 0.0, 0.0, 0.0
    return 100.0 * central / total, 100.0 * elim / total, 100.0 * comb / total


def _timed_run(cfg: BenchConfig, run: int, duration_ms: int) -> RunResult:
    stack = make_stack(cfg.algo, cfg.threads, seed=cfg.seed + run, interleave=cfg.interleave, **cfg.knobs)
    stack.load(range(cfg.cells))
    stop = threading.Event()
    start = threading.Barrier(cfg.threads + 1)
    done = [0] * cfg.threads
    empties = [0] * cfg.threads
    errors: List[BaseException] = []

    def worker(w: int) -> None:
        try:
            stack.register()
            kinds = op_stream(cfg.seed, run, w, cfg.push_ratio)
            base = (w + 1) << 40
            n = empty = 0
            push, pop = stack.push, stack.pop
            start.wait()
            while not stop.is_set():
                for _ in range(CHECK_EVERY):
                    if next(kinds):
                        push(base + n)
                    elif pop() is EMPTY:
                        empty += 1
                    n += 1
            done[w] = n
            empties[w] = empty
        except threading.BrokenBarrierError:
            pass
        except BaseException as exc:  # reported by the driver
            errors.append(exc)
            start.abort()
        finally:
            stack.retire()

    workers = [threading.Thread(target=worker, args=(w,), name=f"bench-{w}", daemon=True) for w in range(cfg.threads)]
    for t in workers:
        try:
            t.start()
        except RuntimeError as exc:
            start.abort()
            stop.set()
            raise BenchError(f"could not start worker thread: {exc}") from exc
    try:
        start.wait()
    except threading.BrokenBarrierError:
        raise BenchError(f"worker failed before start: {errors[0]!r}" if errors else "start barrier broken") from None
    t0 = time.perf_counter()
    time.sleep(duration_ms / 1000.0)
    stop.set()
    deadline = time.monotonic() + _watchdog_seconds(duration_ms)
    for t in workers:
        t.join(max(0.0, deadline - time.monotonic()))
    elapsed = time.perf_counter() - t0
    stuck = [t.name for t in workers if t.is_alive()]
    if stuck:
        raise BenchError(f"watchdog expired with {len(stuck)} worker(s) still running: {', '.join(stuck)}")
    if errors:
        raise BenchError(f"worker failed: {errors[0]!r}") from errors[0]

    m = stack.metrics()
    ops_total = sum(done)
    if m.total != ops_total:
        raise BenchError(f"attribution lost operations: counted {m.total}, completed {ops_total}")
    central, elim, comb = _percentages(m.central_ops, m.elim_ops, m.comb_ops)
    return RunResult(
        run,
        elapsed * 1000.0,
        ops_total,
        ops_total / elapsed,
        central,
        elim,
        comb,
        m.central_ops,
        m.elim_ops,
        m.comb_ops,
        sum(empties),
        stack.await_timeouts(),
    )


def run_benchmark(cfg: BenchConfig) -> BenchReport:
    """Warm up once, then run ``cfg.runs`` timed runs."""
    report = BenchReport(cfg.algo, cfg.threads, cfg.push_ratio)
    if cfg.warmup_ms > 0:
        _timed_run(cfg, -1, cfg.warmup_ms)
    for run in range(cfg.runs):
        res = _timed_run(cfg, run, cfg.duration_ms)
        log.info(
            "%s threads=%d push=%.2f run=%d: %.0f ops/s (central %.1f%%, elim %.1f%%, comb %.1f%%)",
            cfg.algo, cfg.threads, cfg.push_ratio, run, res.throughput_ops_per_s,
            res.central_pct, res.elim_pct, res.comb_pct,
        )
        if res.empty_pops:
            report.flags.append(f"empty-pops run={run} count={res.empty_pops}")
        report.runs.append(res)
    if cfg.output:
        emit_csv(report, cfg.output)
    return report


# -- CSV ----------------------------------------------------------------------


def _row(report: BenchReport, res: RunResult) -> List[str]:
    return [
        report.algo,
        str(report.threads),
        repr(report.push_ratio),
        str(res.run),
        repr(float(res.duration_ms)),
        repr(res.ops_total),
        repr(float(res.throughput_ops_per_s)),
        repr(float(res.central_pct)),
        repr(float(res.elim_pct)),
        repr(float(res.comb_pct)),
    ]


def emit_csv(reports: Union[BenchReport, Iterable[BenchReport]], path) -> None:
    """Write the header, then one row per run and an ``avg`` row per report."""
    if isinstance(reports, BenchReport):
        reports = [reports]
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_HEADER)
        for rep in reports:
            for res in rep.runs:
                w.writerow(_row(rep, res))
            if rep.runs:
                w.writerow(_row(rep, rep.avg))


def read_csv(path) -> List[BenchReport]:
    """Parse a file written by ``emit_csv``; ``avg`` rows are recomputed, not stored."""
    reports: Dict[Tuple[str, int, float], BenchReport] = {}
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            return []
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        for row in reader:
            if not row:
                continue
            algo, threads, ratio, run, dur, ops, tput, c, e, k = row
            key = (algo, int(threads), float(ratio))
            rep = reports.setdefault(key, BenchReport(*key))
            if run == "avg":
                continue
            rep.runs.append(RunResult(int(run), float(dur), int(ops), float(tput), float(c), float(e), float(k)))
    return list(reports.values())


# -- sweeps -------------------------------------------------------------------


@dataclass(frozen=True)
class SweepConfig:
    algos: Tuple[str, ...] = tuple(ALGORITHMS)
    threads: Tuple[int, ...] = DEFAULT_THREAD_GRID
    push_ratios: Tuple[float, ...] = (0.5, 0.25, 0.0)
    duration_ms: int = 1000
    runs: int = 3
    seed: int = 0
    prepopulate: Optional[int] = None
    warmup_ms: int = 100
    interleave: bool = False
    plots: bool = False
    knobs: Dict[str, Any] = field(default_factory=dict)

    def points(self) -> Iterator[BenchConfig]:
        for ratio in self.push_ratios:
            for algo in self.algos:
                for threads in self.threads:
                    yield BenchConfig(
                        algo=algo,
                        threads=threads,
                        duration_ms=self.duration_ms,
                        push_ratio=ratio,
                        prepopulate=self.prepopulate,
                        runs=self.runs,
                        seed=self.seed,
                        warmup_ms=self.warmup_ms,
                        interleave=self.interleave,
                        knobs=dict(self.knobs),
                    )


_LIST_KEYS = {"algos": str, "threads": int, "push_ratios": float}
_SCALAR_KEYS = {"duration_ms": int, "runs": int, "seed": int, "prepopulate": int, "warmup_ms": int}
_BOOL_KEYS = {"interleave", "plots"}
_KNOB_KEYS = {"collision_width": int, "wait_spins": int, "yield_after": int, "bounded_await_spins": int}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_sweep_file(path) -> SweepConfig:
    """Read ``key = value`` lines; lists are comma separated and ``#`` starts a comment."""
    values: Dict[str, Any] = {}
    knobs: Dict[str, Any] = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            try:
                if key in _LIST_KEYS:
                    conv = _LIST_KEYS[key]
                    values[key] = tuple(conv(v.strip().strip("\"'")) for v in value.strip("[]").split(",") if v.strip())
                elif key in _SCALAR_KEYS:
                    values[key] = _SCALAR_KEYS[key](value)
                elif key in _BOOL_KEYS:
                    values[key] = _parse_bool(value)
                elif key in _KNOB_KEYS:
                    knobs[key] = _KNOB_KEYS[key](value)
                else:
                    raise ValueError(f"unknown key {key!r}")
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    cfg = SweepConfig(**values, knobs=knobs)
    bad = [a for a in cfg.algos if a not in ALGORITHMS]
    if bad:
        raise ValueError(f"{path}: unknown algorithm(s) {bad}")
    return cfg


@dataclass
class SweepResult:
    reports: List[BenchReport]
    failures: List[Tuple[BenchConfig, str]]
    csv_path: Optional[Path] = None
    plot_paths: List[Path] = field(default_factory=list)


def sweep(cfg: SweepConfig, out_dir=None) -> SweepResult:
    """Run every grid point; a failing point is recorded and the sweep goes on."""
    reports: List[BenchReport] = []
    failures: List[Tuple[BenchConfig, str]] = []
    for point in cfg.points():
        try:
            reports.append(run_benchmark(point))
        except (BenchError, ValueError) as exc:
            log.error("point %s/%d/%.2f failed: %s", point.algo, point.threads, point.push_ratio, exc)
            failures.append((point, str(exc)))
    result = SweepResult(reports, failures)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        result.csv_path = out / "results.csv"
        emit_csv(reports, result.csv_path)
        if cfg.plots:
            result.plot_paths = plot_results(reports, out)
    return result


def plot_results(reports: Sequence[BenchReport], out_dir) -> List[Path]:
    """Per workload: throughput vs threads, and elimination plus combining share vs threads."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    by_ratio: Dict[float, Dict[str, List[BenchReport]]] = {}
    for rep in reports:
        if rep.runs:
            by_ratio.setdefault(rep.push_ratio, {}).setdefault(rep.algo, []).append(rep)
    paths = []
    for ratio, algos in sorted(by_ratio.items(), reverse=True):
        pct = int(round(ratio * 100))
        for metric, ylabel, stem in (
            (lambda a: a.throughput_ops_per_s, "operations / s", "throughput"),
            (lambda a: a.elim_pct + a.comb_pct, "eliminated + combined (%)", "collisions"),
        ):
            fig, ax = plt.subplots(figsize=(6, 4))
            for algo, reps in sorted(algos.items()):
                reps = sorted(reps, key=lambda r: r.threads)
                ax.plot([r.threads for r in reps], [metric(r.avg) for r in reps], marker="o", label=algo)
            ax.set_xscale("log", base=2)
            ax.set_xlabel("threads")
            ax.set_ylabel(ylabel)
            ax.set_title(f"{stem.capitalize()}: {pct}% push, {100 - pct}% pop")
            ax.legend()
            fig.tight_layout()
            path = out / f"{stem}_push{pct}.png"
            fig.savefig(path)
            plt.close(fig)
            paths.append(path)
    return paths


def plot_csv(csv_path, out_dir) -> List[Path]:
    return plot_results(read_csv(csv_path), out_dir)
