import numpy as np
import pytest

from blockbound.core import RngStream


@pytest.fixture
def stream():
    return RngStream(20261015)


def ar1(phi, n, seed, sd=1.0):
    """Plain-loop AR(1) path, independent of the package simulators."""
    g = np.random.default_rng(seed)
    e = g.normal(0.0, sd, n + 500)
    x = np.zeros(n + 500)
    for i in range(1, n + 500):
        x[i] = phi * x[i - 1] + e[i]
    return x[500:]


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
