from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bitypical.tensorspace import TensorSpace, random_density  # noqa: E402

GRID = (0.05, 0.2, 0.5, 1.0, 2.0)
SEEDS = (0, 1, 2, 3, 4)

# criterion number -> (title, list of outcomes)
_ACCEPTANCE: dict[int, tuple[str, list[bool]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): test belongs to an acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE.setdefault(number, (title, []))[1].append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, results = _ACCEPTANCE[number]
        verdict = "PASS" if results and all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d} {verdict}  {title}  ({sum(results)}/{len(results)} tests)")


@pytest.fixture(scope="session")
def space2():
    return TensorSpace(2, 2, 2)


@pytest.fixture(scope="session")
def space3():
    return TensorSpace(2, 2, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=SEEDS)
def rho4(request):
    return random_density(4, request.param)


@pytest.fixture(scope="session")
def grid_results():
    """(seed, n) -> (exact check records, margin records) over the default grid."""
    from bitypical.typicality import run_grid

    out = {}
    for seed in SEEDS:
        rho = random_density(4, seed)
        for n in (2, 3):
            out[(seed, n)] = run_grid(rho, 2, 2, n, GRID, GRID)
    return out
