import numpy as np
import pytest

from swrom import ntswe
from swrom.grid import Grid2D


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def grid8():
    return Grid2D(8, 8, -5.0, 5.0, -5.0, 5.0)


@pytest.fixture
def grid4():
    return Grid2D(4, 4, -5.0, 5.0, -5.0, 5.0)


def rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


def random_state(grid, rng, amplitude=0.3):
    """Smooth-ish random state with h around 1."""
    n = grid.size
    w = amplitude * rng.standard_normal(3 * n)
    w[2 * n:] += 1.0
    return w


def particle_rest(grid, theta, h=1.0):
    """Flat layer with zero particle velocity, in canonical variables."""
    n = grid.size
    w = np.zeros(3 * n)
    w[:n] = ntswe.DELTA * np.cos(theta) * h / 2
    w[2 * n:] = h
    return w


# One line per acceptance criterion, echoed in the terminal summary.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
