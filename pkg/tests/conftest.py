import os
import time

import pytest

from causal_covering.harness import desk_config, run_experiment

_RESULTS_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_RESULTS_KEY] = {}


@pytest.fixture
def acceptance(request):
    """Record ``(criterion, passed, detail)`` for the summary printed at the end."""
    results = request.config.stash[_RESULTS_KEY]

    def record(number, title, passed, detail):
        results[number] = (title, bool(passed), detail)
        print(f"criterion {number} {'PASS' if passed else 'FAIL'}: {title}: {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash[_RESULTS_KEY]
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        title, passed, detail = results[number]
        terminalreporter.write_line(f"criterion {number} {'PASS' if passed else 'FAIL'}: {title}: {detail}")


@pytest.fixture(scope="session")
def desk_report():
    """The h=5, R=200 regret sweep over T = 2^12..2^17 (a few minutes on one core)."""
    workers = min(8, os.cpu_count() or 1)
    t0 = time.perf_counter()
    report = run_experiment(desk_config(), threads=workers)
    return report, time.perf_counter() - t0, workers
