import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from reeblab import axis_orbit, hopf, split  # noqa: E402
from oracles import SQRT2  # noqa: E402

_CRITERIA = pytest.StashKey[dict]()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion n")
    config.stash[_CRITERIA] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is None:
        return
    n, text = m.args
    store = item.config.stash[_CRITERIA]
    prev = store.get(n, (text, "PASS"))[1]
    if rep.failed:
        status = "FAIL"
    elif rep.skipped:
        status = "SKIP" if prev == "PASS" else prev
    else:
        status = prev
    store[n] = (text, status)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash[_CRITERIA]
    if not store:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(store):
        text, status = store[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {text}")


@pytest.fixture(scope="session")
def sys_sqrt2():
    return split(1.0, SQRT2)


@pytest.fixture(scope="session")
def sys_hopf():
    return hopf()


@pytest.fixture(scope="session")
def gammas(sys_sqrt2):
    return axis_orbit(sys_sqrt2, 1), axis_orbit(sys_sqrt2, 2)


@pytest.fixture(scope="session")
def orbits_sqrt2(sys_sqrt2):
    from reeblab.orbits import find_periodic_orbits

    return find_periodic_orbits(sys_sqrt2, 10.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
