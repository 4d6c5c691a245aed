import threading
import time

import pytest

from decs import ALGORITHMS

ALGOS = sorted(ALGORITHMS)

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.skipped):
        note = ""
        if rep.skipped:
            verdict = "SKIP"
            reason = rep.longrepr[2] if isinstance(rep.longrepr, tuple) else str(rep.longrepr)
            note = f" ({reason.removeprefix('Skipped: ')})"
        else:
            verdict = "PASS" if rep.passed else "FAIL"
        prev = _criteria.get(number)
        # a parametrized criterion fails if any of its cases fails
        if prev is None or prev[1] != "FAIL":
            _criteria[number] = (title, verdict, note)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, verdict, note = _criteria[number]
        terminalreporter.write_line(f"criterion {number:>2} {verdict:<4} {title}{note}")


def run_threads(target, n, timeout=60.0, args_for=lambda i: (i,)):
    """Start ``n`` threads on ``target`` and fail the test if any outlives ``timeout``."""
    errors = []

    def wrap(i):
        try:
            target(*args_for(i))
        except BaseException as exc:  # surfaced below
            errors.append(exc)

    threads = [threading.Thread(target=wrap, args=(i,), daemon=True) for i in range(n)]
    for t in threads:
        t.start()
    deadline = time.monotonic() + timeout
    for t in threads:
        t.join(max(0.0, deadline - time.monotonic()))
    alive = sum(t.is_alive() for t in threads)
    if alive:
        pytest.fail(f"{alive} thread(s) still running after {timeout}s")
    if errors:
        raise errors[0]


@pytest.fixture(params=ALGOS)
def algo(request):
    return request.param
