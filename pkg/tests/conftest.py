import os
import sys
import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

_START = time.perf_counter()
_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")
    config.addinivalue_line("markers", "last: run after every other collected test")


def pytest_sessionstart(session):
    global _START
    _START = time.perf_counter()


def pytest_collection_modifyitems(session, config, items):
    items.sort(key=lambda item: item.get_closest_marker("last") is not None)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    status = _CRITERIA.get(number, (title, "pass"))[1]
    if rep.failed:
        status = "FAIL"
    elif rep.skipped and status == "pass":
        status = "skip"
    _CRITERIA[number] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status = _CRITERIA[number]
        terminalreporter.write_line(f"C{number:<3}{status:<5} {title}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def bicubic_knots():
    return [0.0] * 4 + [1.0, 2.0, 3.0, 4.0, 5.0, 6.0] + [7.0] * 4


SCENARIOS = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "scenarios")


@pytest.fixture(scope="session")
def scenario_dir():
    return SCENARIOS


@pytest.fixture(scope="session")
def scenario_run():
    """Run a shipped scenario once per session; returns the finished run."""
    from lrkit.cli import load_scenario, run_scenario

    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = run_scenario(load_scenario(os.path.join(SCENARIOS, name + ".scn")))
        return cache[name]

    return get


@pytest.fixture(scope="session")
def session_elapsed():
    """Seconds since the test session started."""
    return lambda: time.perf_counter() - _START
