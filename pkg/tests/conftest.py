import numpy as np
import pytest

from granular_jko.grid import Grid1D
from granular_jko.jko import assemble_kernel

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_grid(rng, n=9, L=2.0):
    """Strictly increasing nodes strictly inside (-L, L)."""
    pts = np.sort(rng.uniform(-0.95 * L, 0.95 * L, n))
    while np.any(np.diff(pts) < 1e-3):
        pts = np.sort(rng.uniform(-0.95 * L, 0.95 * L, n))
    return Grid1D(pts, L)


def explicit_upwind_step(f, dt, grid, kspec):
    """Explicit upwind finite-volume step of ``f_t = d_v(f d_v(K * f))``."""
    v, h = grid.nodes, grid.weights
    phi = assemble_kernel(grid, kspec) @ (f * h)
    u = -np.diff(phi) / np.diff(v)
    upwind = np.where(u > 0, f[:-1], f[1:])
    flux = np.concatenate([[0.0], u * upwind, [0.0]])
    return f - dt * np.diff(flux) / h


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
