"""Semi-Lagrangian free transport ``f_t + v f_x = 0`` with periodic ``x``."""

from __future__ import annotations

import numpy as np
from scipy.interpolate import PchipInterpolator

from .grid import FLOOR, Grid1D, PhaseField, quadrature_mass

__all__ = ["advect_slice", "transport_step", "periodic_interpolant"]

_GHOSTS = 3


def periodic_interpolant(grid: Grid1D, values) -> PchipInterpolator:
    """pchip through the nodes extended by three periodic ghost nodes per side.

    ``values`` may be 2D with the x-axis first; each column gets its own curve.
    """
    L = grid.half_length
    x = grid.nodes
    values = np.asarray(values, dtype=float)
    xe = np.concatenate([x[-_GHOSTS:] - 2 * L, x, x[:_GHOSTS] + 2 * L])
    ye = np.concatenate([values[-_GHOSTS:], values, values[:_GHOSTS]], axis=0)
    return PchipInterpolator(xe, ye, axis=0)


def _wrap(y, L):
    return (y + L) % (2 * L) - L


def _as_grid(query, like: Grid1D) -> Grid1D:
    if isinstance(query, Grid1D):
        return query
    return Grid1D(np.asarray(query, dtype=float), like.half_length)


def advect_slice(x_grid_old: Grid1D, f_old, x_query, v: float, dt: float) -> np.ndarray:
    """Trace ``x - v dt`` back onto the old grid and rescale to the old slice mass.

    ``x_query`` is a :class:`Grid1D` (or node array on the same domain); the
    mass after interpolation is measured with its weights.
    """
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    q = _as_grid(x_query, x_grid_old)
    f_old = np.asarray(f_old, dtype=float)
    feet = _wrap(q.nodes - v * dt, x_grid_old.half_length)
    out = np.maximum(periodic_interpolant(x_grid_old, f_old)(feet), FLOOR)
    m_old = quadrature_mass(x_grid_old, f_old)
    return out * (m_old / quadrature_mass(q, out))


def transport_step(field: PhaseField, x_grid_new: Grid1D, dt: float) -> PhaseField:
    """Advect every velocity slice of ``field`` onto ``x_grid_new``."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    xg, vg = field.x_grid, field.v_grid
    out = np.empty((len(x_grid_new), len(vg)))
    for j, v in enumerate(vg.nodes):
        out[:, j] = advect_slice(xg, field.values[:, j], x_grid_new, v, dt)
    return PhaseField(x_grid_new, vg, out)
