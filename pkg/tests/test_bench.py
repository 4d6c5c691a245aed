import csv
import itertools
import time

import pytest

import decs.bench as bench
from decs import make_stack
from decs.bench import (
    CSV_HEADER,
    BenchConfig,
    BenchError,
    BenchReport,
    RunResult,
    SweepConfig,
    emit_csv,
    op_stream,
    parse_sweep_file,
    read_csv,
    run_benchmark,
    sweep,
)


def quick(**kw):
    base = dict(duration_ms=50, runs=1, warmup_ms=0)
    base.update(kw)
    return BenchConfig(**base)


@pytest.mark.parametrize(
    "kw",
    [dict(threads=0), dict(runs=0), dict(push_ratio=1.5), dict(push_ratio=-0.1), dict(algo="x"), dict(duration_ms=0)],
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        BenchConfig(**kw)


def test_default_prepopulation_scales_and_caps():
    assert BenchConfig(threads=2, duration_ms=10).cells == 2000
    assert BenchConfig(threads=64, duration_ms=1000).cells == bench.DEFAULT_MAX_PREPOPULATE
    assert BenchConfig(prepopulate=5).cells == 5


def test_op_streams_are_reproducible_and_follow_the_ratio():
    a = list(itertools.islice(op_stream(1, 0, 3, 0.25), 4000))
    b = list(itertools.islice(op_stream(1, 0, 3, 0.25), 4000))
    c = list(itertools.islice(op_stream(1, 0, 4, 0.25), 4000))
    assert a == b and a != c
    assert 0.2 < sum(a) / len(a) < 0.3
    assert not any(itertools.islice(op_stream(1, 0, 0, 0.0), 1000))
    assert all(itertools.islice(op_stream(1, 0, 0, 1.0), 1000))


def test_single_thread_run_is_all_central(algo):
    rep = run_benchmark(quick(algo=algo, threads=1, push_ratio=0.5))
    res = rep.runs[0]
    assert res.central_pct == 100.0 and res.elim_pct == 0.0 and res.comb_pct == 0.0
    assert res.ops_total > 0


def test_attribution_is_conserved(algo):
    rep = run_benchmark(quick(algo=algo, threads=4, push_ratio=0.5, runs=2, interleave=True))
    for res in rep.runs:
        assert res.central_ops + res.elim_ops + res.comb_ops == res.ops_total
        assert res.central_pct + res.elim_pct + res.comb_pct == pytest.approx(100.0)


def test_pop_only_run_with_too_few_cells_is_flagged():
    rep = run_benchmark(quick(algo="treiber", threads=2, push_ratio=0.0, prepopulate=10))
    assert not rep.sufficient_prepopulation
    assert rep.runs[0].empty_pops > 0
    ok = run_benchmark(quick(algo="treiber", threads=1, push_ratio=0.5))
    assert ok.sufficient_prepopulation


def test_watchdog_aborts_a_hung_run(monkeypatch):
    class Hung:
        def __init__(self):
            self.stack = make_stack("treiber", 2)

        def __getattr__(self, name):
            return getattr(self.stack, name)

        def pop(self, *args):
            time.sleep(3600)

        push = pop

    monkeypatch.setenv(bench.WATCHDOG_ENV, "0.2")
    monkeypatch.setattr(bench, "make_stack", lambda *a, **k: Hung())
    with pytest.raises(BenchError, match="watchdog"):
        run_benchmark(quick(threads=2))


def test_worker_failure_is_reported(monkeypatch):
    class Broken:
        def __init__(self):
            self.stack = make_stack("treiber", 1)

        def __getattr__(self, name):
            return getattr(self.stack, name)

        def pop(self, *args):
            raise KeyError("boom")

        push = pop

    monkeypatch.setattr(bench, "make_stack", lambda *a, **k: Broken())
    with pytest.raises(BenchError, match="boom"):
        run_benchmark(quick(threads=1))


def sample_report(runs=3):
    rep = BenchReport("decs", 4, 0.25)
    for r in range(runs):
        rep.runs.append(RunResult(r, 1000.5 + r, 1000 * (r + 1), 999.25 * (r + 1), 60.0, 30.0 + r, 10.0 - r))
    return rep


def test_emit_csv_empty_report_writes_header_only(tmp_path):
    path = tmp_path / "r.csv"
    emit_csv(BenchReport("decs", 1, 0.5), path)
    assert path.read_text().splitlines() == [",".join(CSV_HEADER)]


def test_emit_csv_three_runs_gives_four_rows(tmp_path):
    path = tmp_path / "r.csv"
    emit_csv(sample_report(), path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == CSV_HEADER
    assert [r[3] for r in rows[1:]] == ["0", "1", "2", "avg"]
    assert float(rows[4][5]) == 2000.0


def test_csv_round_trip(tmp_path):
    path = tmp_path / "r.csv"
    reports = [sample_report(), sample_report(1)]
    reports[1].algo = "hsy"
    emit_csv(reports, path)
    back = read_csv(path)
    assert back == reports


def test_run_benchmark_writes_output(tmp_path):
    out = tmp_path / "sub" / "res.csv"
    rep = run_benchmark(quick(algo="decs", threads=2, output=str(out)))
    assert read_csv(out) == [rep]


def test_sweep_file_parsing(tmp_path):
    path = tmp_path / "grid.cfg"
    path.write_text(
        "# grid\n"
        "algos = treiber, decs\n"
        "threads = [1, 2]\n"
        "push_ratios = 0.5\n"
        "duration_ms = 20  # short\n"
        "runs = 1\n"
        "warmup_ms = 0\n"
        "interleave = yes\n"
        "wait_spins = 8\n"
    )
    cfg = parse_sweep_file(path)
    assert cfg.algos == ("treiber", "decs") and cfg.threads == (1, 2) and cfg.push_ratios == (0.5,)
    assert cfg.interleave and cfg.knobs == {"wait_spins": 8}
    assert len(list(cfg.points())) == 4


@pytest.mark.parametrize("text", ["bogus = 1\n", "threads = x\n", "algos = nope\n", "just words\n", "interleave = maybe\n"])
def test_sweep_file_errors(tmp_path, text):
    path = tmp_path / "grid.cfg"
    path.write_text(text)
    with pytest.raises(ValueError):
        parse_sweep_file(path)


def test_sweep_single_point(tmp_path):
    cfg = SweepConfig(algos=("treiber",), threads=(1,), push_ratios=(0.5,), duration_ms=20, runs=1, warmup_ms=0)
    result = sweep(cfg, tmp_path)
    assert len(result.reports) == 1 and not result.failures
    assert read_csv(result.csv_path) == result.reports


def test_sweep_continues_past_failures(monkeypatch, tmp_path):
    real = bench.run_benchmark

    def flaky(cfg):
        if cfg.algo == "hsy":
            raise BenchError("injected")
        return real(cfg)

    monkeypatch.setattr(bench, "run_benchmark", flaky)
    cfg = SweepConfig(algos=("hsy", "treiber"), threads=(1,), push_ratios=(0.5,), duration_ms=20, runs=1, warmup_ms=0)
    result = sweep(cfg, tmp_path)
    assert [r.algo for r in result.reports] == ["treiber"]
    assert len(result.failures) == 1 and result.failures[0][1] == "injected"


def test_plots_are_written(tmp_path):
    reports = []
    for algo in ("hsy", "decs"):
        for threads in (1, 2):
            rep = sample_report(2)
            rep.algo, rep.threads = algo, threads
            reports.append(rep)
    paths = bench.plot_results(reports, tmp_path)
    assert sorted(p.name for p in paths) == ["collisions_push25.png", "throughput_push25.png"]
    assert all(p.stat().st_size > 0 for p in paths)
