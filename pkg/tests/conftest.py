import time
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
GRAPHS = ROOT / "graphs"

_criteria: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def graphs_dir():
    return GRAPHS


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call":
        return
    number, title = mark.args
    entry = _criteria.setdefault(number, {"title": title, "passed": True, "seconds": 0.0, "tests": 0})
    entry["passed"] &= rep.passed
    entry["seconds"] += rep.duration
    entry["tests"] += 1


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_criteria):
        e = _criteria[number]
        verdict = "PASS" if e["passed"] else "FAIL"
        tr.write_line(f"criterion {number:2d} {verdict}  {e['title']}  ({e['seconds']:.1f} s, {e['tests']} test(s))")


class Budget:
    """Context manager asserting a wall-clock budget."""

    def __init__(self, seconds: float):
        self.seconds = seconds

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.1f} s, budget {self.seconds} s"
        return False


@pytest.fixture
def budget():
    return Budget
