"""Non-uniform cell-centred grids, boundary-corrected quadrature and regridding.

A :class:`Grid1D` holds ``N`` strictly increasing nodes inside ``(-L, L)``.
Each node carries the quadrature weight

* interior: ``(v[j+1] - v[j-1]) / 2``
* left:     ``L + (v[1] + v[0]) / 2``
* right:    ``L - (v[-1] + v[-2]) / 2``

so the weights always sum to ``2 L``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

__all__ = [
    "FLOOR",
    "Grid1D",
    "PhaseField",
    "quadrature_mass",
    "interpolate",
    "rescale_mass",
    "regrid_2d",
    "write_snapshot",
    "read_snapshot",
]

#: Positivity floor applied after every interpolation.
FLOOR = 1e-10


@dataclass(frozen=True, eq=False)
class Grid1D:
    nodes: np.ndarray
    half_length: float
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        L = float(self.half_length)
        if nodes.ndim != 1 or nodes.size < 3:
            raise ValueError("a grid needs at least 3 nodes")
        if not L > 0:
            raise ValueError("half_length must be positive")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if nodes[0] <= -L or nodes[-1] >= L:
            raise ValueError("nodes must lie strictly inside (-L, L)")
        nodes.setflags(write=False)
        w = np.empty_like(nodes)
        w[1:-1] = 0.5 * (nodes[2:] - nodes[:-2])
        w[0] = L + 0.5 * (nodes[1] + nodes[0])
        w[-1] = L - 0.5 * (nodes[-1] + nodes[-2])
        w.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "half_length", L)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, n: int, half_length: float) -> "Grid1D":
        """Cell-centred uniform grid ``x_i = -L + (i - 1/2) 2L/n``."""
        h = 2.0 * half_length / n
        return cls(-half_length + (np.arange(n) + 0.5) * h, half_length)

    def __len__(self):
        return self.nodes.size

    @property
    def spacing(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def min_spacing(self) -> float:
        return float(np.min(np.diff(self.nodes)))

    def is_symmetric(self, rtol: float = 1e-12) -> bool:
        return bool(np.allclose(self.nodes, -self.nodes[::-1], rtol=0, atol=rtol * self.half_length))

    def nearest_index(self, x: float) -> int:
        return int(np.argmin(np.abs(self.nodes - x)))


@dataclass(eq=False)
class PhaseField:
    """Samples ``f(x_i, v_j)`` on a tensor grid, shape ``(N_x, N_v)``."""

    x_grid: Grid1D
    v_grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        shape = (len(self.x_grid), len(self.v_grid))
        if self.values.shape != shape:
            raise ValueError(f"values have shape {self.values.shape}, expected {shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")

    def mass(self) -> float:
        return float(self.x_grid.weights @ self.values @ self.v_grid.weights)

    def copy(self) -> "PhaseField":
        return PhaseField(self.x_grid, self.v_grid, self.values.copy())


def quadrature_mass(grid: Grid1D, values) -> float:
    """Boundary-corrected quadrature ``sum_j values_j * weights_j``.

    ``values`` may carry extra leading axes; the last axis is integrated.
    """
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != len(grid):
        raise ValueError(
            f"length mismatch: {values.shape[-1]} values for {len(grid)} nodes"
        )
    out = values @ grid.weights
    return out if np.ndim(out) else float(out)


def interpolate(src: Grid1D, values, query, axis: int = -1) -> np.ndarray:
    """Monotone piecewise-cubic Hermite (PCHIP) interpolation.

    Queries outside ``[src.nodes[0], src.nodes[-1]]`` are clamped to the end
    values; callers needing periodic behaviour wrap before calling.
    """
    query = np.asarray(query, dtype=float)
    q = np.clip(query, src.nodes[0], src.nodes[-1])
    return PchipInterpolator(src.nodes, values, axis=axis, extrapolate=False)(q)


def rescale_mass(grid: Grid1D, values, target_mass) -> np.ndarray:
    """Floor at :data:`FLOOR`, then scale so the quadrature equals ``target_mass``.

    With 2-D input every row (last axis) is rescaled to its own target.
    """
    floored = np.maximum(np.asarray(values, dtype=float), FLOOR)
    current = floored @ grid.weights
    scale = np.asarray(target_mass, dtype=float) / current
    if floored.ndim > 1:
        scale = scale[..., None]
    return floored * scale


def regrid_2d(field: PhaseField, x_new: Grid1D, v_new: Grid1D) -> PhaseField:
    """Move a field onto a new tensor grid, conserving mass dimensionwise.

    Every x-row is interpolated in v and rescaled to its old v-mass, then
    every v-column is interpolated in x and rescaled to its x-mass on the old
    x-grid. Total mass is conserved exactly.
    """
    f = field.values
    if v_new is not field.v_grid:
        row_mass = f @ field.v_grid.weights
        f = interpolate(field.v_grid, f, v_new.nodes, axis=1)
        f = rescale_mass(v_new, f, row_mass)
    if x_new is not field.x_grid:
        col_mass = field.x_grid.weights @ f
        g = interpolate(field.x_grid, f, x_new.nodes, axis=0)
        f = rescale_mass(x_new, g.T, col_mass).T
    return PhaseField(x_new, v_new, np.ascontiguousarray(f))


def write_snapshot(path, field: PhaseField, t: float) -> Path:
    """Plain-text snapshot: header ``# t=.. Nx=.. Nv=..`` then ``x v f`` rows."""
    path = Path(path)
    nx, nv = field.values.shape
    X, V = np.meshgrid(field.x_grid.nodes, field.v_grid.nodes, indexing="ij")
    rows = np.column_stack([X.ravel(), V.ravel(), field.values.ravel()])
    header = (
        f"t={t:.17g} Nx={nx} Nv={nv}\n"
        f"Lx={field.x_grid.half_length:.17g} Lv={field.v_grid.half_length:.17g}"
    )
    np.savetxt(path, rows, fmt="%.17g", header=header, comments="# ")
    return path


def read_snapshot(path):
    """Inverse of :func:`write_snapshot`; returns ``(field, t)``."""
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().lstrip("#").split() + fh.readline().lstrip("#").split()
    meta = dict(item.split("=", 1) for item in header)
    nx, nv = int(meta["Nx"]), int(meta["Nv"])
    data = np.loadtxt(path, comments="#").reshape(nx, nv, 3)
    x_grid = Grid1D(data[:, 0, 0], float(meta["Lx"]))
    v_grid = Grid1D(data[0, :, 1], float(meta["Lv"]))
    return PhaseField(x_grid, v_grid, data[:, :, 2]), float(meta["t"])
