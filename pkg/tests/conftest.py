import time

import numpy as np
import pytest

from gpe1d import ComplexField, Grid1D


def smooth_field(grid, seed=0, modes=6, offset=1.0):
    """Band-limited random field with a nonzero mean; unit norm."""
    rng = np.random.default_rng(seed)
    x = grid.x
    v = np.full(grid.n_points, offset, dtype=complex)
    for m in range(1, modes + 1):
        a, b = rng.normal(size=2) + 1j * rng.normal(size=2)
        k = 2 * np.pi * m / grid.length
        v += (a * np.exp(1j * k * x) + b * np.exp(-1j * k * x)) / (m * m)
    v /= np.sqrt(np.vdot(v, v).real * grid.spacing)
    return ComplexField(grid, v)


@pytest.fixture
def grid64():
    return Grid1D(64)


@pytest.fixture
def field64(grid64):
    return smooth_field(grid64)


SESSION_START = time.perf_counter()

# One line per acceptance criterion, shown at the end of every run.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
