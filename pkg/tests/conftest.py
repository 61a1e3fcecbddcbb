import math

import pytest

from sparse_select import FunctionSpace

SIGMA_A = 1.0 / (2.0 * math.pi)


@pytest.fixture
def sobolev1():
    return FunctionSpace.sobolev(1.0)


@pytest.fixture
def analytic1():
    return FunctionSpace.analytic(SIGMA_A)


@pytest.fixture
def analytic_k10(analytic1):
    from sparse_select import solve_extremal

    r = math.exp(-10.0)
    return solve_extremal(analytic1, r, r)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
