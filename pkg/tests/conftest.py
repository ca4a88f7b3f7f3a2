import numpy as np
import pytest

from concavex.functional import ProblemParams
from concavex.grid import build_domain
from concavex.solver import ConstraintSet
from concavex.threshold import estimate_constants, mu_star, radius_interval


class Setting:
    """A grid, exponents at half the critical parameter, and the invariant interval."""

    def __init__(self, dimension, nodes, p, q=1.5, fraction=0.5):
        self.domain = build_domain(dimension, [1.0] * dimension, [nodes] * dimension)
        base = ProblemParams(p, q)
        self.ec = estimate_constants(self.domain, base, seed=0)
        th = mu_star(self.ec, base)
        self.mu_star, self.r_star = th.mu_star, th.r_star
        self.params = base.with_mu(fraction * th.mu_star)
        self.interval = radius_interval(self.ec, self.params)
        self.r1, self.r2 = self.interval.r1, self.interval.r2

    def ball(self, nonnegative=False):
        return ConstraintSet(self.r2, nonnegative)


@pytest.fixture(scope="session")
def setting_1d():
    return Setting(1, 63, 3.0)


@pytest.fixture(scope="session")
def setting_2d():
    return Setting(2, 32, 4.0)


@pytest.fixture(scope="session")
def setting_3d():
    return Setting(3, 9, 8.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
