import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from decopt.objective import PenaltyObjective, QuadraticObjective
from decopt.topology import complete_topology, metropolis_weights, path_topology


def p2_problem(alpha=1.0):
    """Two nodes, f_1 = 1/2 x^2, f_2 = 1/2 (x - 2)^2, W = [[.5,.5],[.5,.5]]."""
    top = path_topology(2)
    locs = [QuadraticObjective.centered([[1.0]], [0.0]),
            QuadraticObjective.centered([[1.0]], [2.0])]
    return PenaltyObjective(metropolis_weights(top), alpha, locs)


@pytest.fixture
def p2():
    return p2_problem()


@pytest.fixture
def triangle():
    return complete_topology(3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
