import math

import numpy as np
import pytest

from forestdual.measure import Exponential, PointMasses, TabulatedDensity
from forestdual.tree import ChronologicalTree, Forest


@pytest.fixture
def bd21():
    return Exponential(2.0, 1.0)


@pytest.fixture
def two_node():
    """Root (0, 3) with one child born at 1 dying at 3."""
    return ChronologicalTree.from_nodes([(0, None, 0.0, 3.0), (1, 0, 1.0, 3.0)])


@pytest.fixture
def atoms():
    # m = 0.6 * 1 + 0.9 * 2 = 2.4 > 1
    return PointMasses(((1.0, 0.6), (2.0, 0.9)))


def gamma_table(shape=2.0, scale=0.5, mass=2.0, r_max=8.0, n=4001):
    from scipy import stats

    grid = np.linspace(r_max / (n - 1), r_max, n - 1)
    return TabulatedDensity(grid, mass * stats.gamma.pdf(grid, shape, scale=scale))


def forest_of(*trees):
    return Forest(tuple(trees))


E = math.e


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.LINES:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.LINES:
            terminalreporter.write_line(line)
