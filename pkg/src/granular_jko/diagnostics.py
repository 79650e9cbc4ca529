"""Conserved and dissipated functionals, peak tracking and level-set checks."""

from __future__ import annotations

import math

import numpy as np

from .grid import FLOOR, Grid1D, PhaseField

__all__ = [
    "moment",
    "moment_1d",
    "entropy",
    "entropy_1d",
    "peak_positions",
    "level_set_vertical_components",
    "log_ratio_rho_m",
    "loglog_slope",
    "field_summary",
    "profile_summary",
]


def _velocity_factor(v, p, signed):
    if p not in (0, 1, 2, 3, 4):
        raise ValueError("p must be one of 0..4")
    return v**p if signed else np.abs(v) ** p


def moment_1d(v_grid: Grid1D, f, p: int, signed: bool = False) -> float:
    """``sum_j g(v_j) f_j h_j`` with ``g = v**p`` (signed) or ``|v|**p``."""
    g = _velocity_factor(v_grid.nodes, p, signed)
    return float(np.sum(g * np.asarray(f, dtype=float) * v_grid.weights))


def moment(field: PhaseField, p: int, signed: bool = False) -> float:
    """Velocity moment of a phase-space field by tensor quadrature."""
    g = _velocity_factor(field.v_grid.nodes, p, signed)
    per_x = field.values @ (g * field.v_grid.weights)
    return float(per_x @ field.x_grid.weights)


def entropy_1d(v_grid: Grid1D, f) -> float:
    """``-sum f log f h`` on the floored profile."""
    f = np.maximum(np.asarray(f, dtype=float), FLOOR)
    return float(-np.sum(f * np.log(f) * v_grid.weights))


def entropy(field: PhaseField) -> float:
    """``-int int f log f dx dv`` on the floored field."""
    f = np.maximum(field.values, FLOOR)
    per_x = (-f * np.log(f)) @ field.v_grid.weights
    return float(per_x @ field.x_grid.weights)


def peak_positions(v_grid: Grid1D, f) -> float:
    """Node of the maximum of ``f`` over ``v > 0``."""
    f = np.asarray(f, dtype=float)
    pos = v_grid.nodes > 0
    if not np.any(pos) or np.max(f[pos]) <= 0:
        raise ValueError("empty field")
    k = int(np.argmax(np.where(pos, f, -np.inf)))
    return float(v_grid.nodes[k])


def level_set_vertical_components(field: PhaseField, level: float) -> int:
    """Largest number of separate runs of ``f > level`` along any fixed-``x`` line."""
    if not level > 0:
        raise ValueError("level must be positive")
    above = (field.values > level).astype(np.int8)
    starts = np.diff(above, axis=1, prepend=0) == 1
    return int(starts.sum(axis=1).max())


def log_ratio_rho_m(field: PhaseField) -> float:
    """``log(rho) / log(m)`` on the column nearest ``x = 0``.

    ``rho`` is the velocity integral of that column and ``m`` its maximum.
    Returns NaN (not applicable) until both exceed ``e``.
    """
    i = field.x_grid.nearest_index(0.0)
    col = field.values[i]
    rho = float(col @ field.v_grid.weights)
    m = float(col.max())
    if rho <= math.e or m <= math.e:
        return math.nan
    return math.log(rho) / math.log(m)


def loglog_slope(t, y) -> float:
    """Least-squares slope of ``log|y|`` against ``log t``."""
    t = np.asarray(t, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    return float(np.polyfit(np.log(t), np.log(y), 1)[0])


def profile_summary(v_grid: Grid1D, f) -> dict:
    """Conserved/dissipated quantities of a velocity profile."""
    f = np.asarray(f, dtype=float)
    return {
        "mass": moment_1d(v_grid, f, 0),
        "momentum": moment_1d(v_grid, f, 1, signed=True),
        "moment2": moment_1d(v_grid, f, 2),
        "moment3": moment_1d(v_grid, f, 3),
        "moment4": moment_1d(v_grid, f, 4),
        "entropy": entropy_1d(v_grid, f),
        "max_f": float(f.max()),
    }


def field_summary(field: PhaseField) -> dict:
    """Conserved/dissipated quantities of a phase-space field."""
    return {
        "mass": moment(field, 0),
        "momentum": moment(field, 1, signed=True),
        "moment2": moment(field, 2),
        "moment3": moment(field, 3),
        "moment4": moment(field, 4),
        "entropy": entropy(field),
        "max_f": float(field.values.max()),
    }
