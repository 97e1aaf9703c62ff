import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from surrogate_mrf.graph import cycle_graph, grid_graph, random_tree
from surrogate_mrf.params import ExponentialParams

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# acceptance results collected as (criterion number, label, passed, detail)
ACCEPTANCE = []


def record(number, label, passed, detail=""):
    ACCEPTANCE.append((number, label, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, label, passed, detail in sorted(ACCEPTANCE):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d} [{status}] {label}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def cycle4():
    return cycle_graph(4)


@pytest.fixture
def grid3():
    return grid_graph(3, 3)


def random_params(graph, m, seed, scale=1.0):
    return ExponentialParams.random(graph, m, np.random.default_rng(seed), scale)


def random_tree_params(n, m, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    return ExponentialParams.random(random_tree(n, rng), m, rng, scale)
