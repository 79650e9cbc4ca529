"""Adaptive mesh refinement through a monotone map ``v = mu(s)``.

A uniform computational grid in ``s in [-1, 1]`` is pushed through the odd
extension of a piecewise map ``mu: [0, 1] -> [0, L]`` that packs a fraction
``delta`` of the nodes into the region where the profile exceeds
``delta0 * max f``.

Pieces are linear, quintic ``a s**5 + b s`` or logistic ``a / (1 + exp(-b s))``.
When the prescribed quintic/logistic form has no monotone solution for the
requested knots, the piece degrades to the straight chord between its end
points, which is always admissible.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .grid import Grid1D, interpolate, quadrature_mass, rescale_mass

__all__ = [
    "BumpMode",
    "MapConstructionError",
    "Piece",
    "MeshMap",
    "concentration_radius_one_bump",
    "concentration_radii_two_bump",
    "build_map_one_bump",
    "build_map_two_bump",
    "uniform_s_nodes",
    "refine",
    "adapt_grid",
]


class BumpMode(str, enum.Enum):
    ONE = "one_bump"
    TWO = "two_bump"


class MapConstructionError(RuntimeError):
    """Raised when no strictly increasing map can be built."""


def _sigmoid(y):
    return 0.5 * (1.0 + np.tanh(0.5 * y))


@dataclass(frozen=True)
class Piece:
    """One branch of ``mu`` on ``[s0, s1]``.

    ``linear``: ``a s + b``; ``quintic``: ``a s**5 + b s``;
    ``sigmoid``: ``a * sigma(b s) - shift``.
    """

    kind: str
    s0: float
    s1: float
    a: float
    b: float
    shift: float = 0.0

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "linear":
            return self.a * s + self.b
        if self.kind == "quintic":
            return self.a * s**5 + self.b * s
        if self.kind == "sigmoid":
            return self.a * _sigmoid(self.b * s) - self.shift
        raise ValueError(self.kind)


@dataclass(frozen=True)
class MeshMap:
    kind: BumpMode
    delta: float
    L: float
    knots: tuple
    pieces: tuple

    def __call__(self, s):
        """Evaluate ``mu`` on ``[0, 1]``."""
        s = np.asarray(s, dtype=float)
        out = np.empty_like(s)
        for k, p in enumerate(self.pieces):
            last = k == len(self.pieces) - 1
            sel = (s >= p.s0) & ((s <= p.s1) if last else (s < p.s1))
            out[sel] = p(s[sel])
        return out

    def odd(self, s):
        """Odd extension to ``[-1, 1]``."""
        s = np.asarray(s, dtype=float)
        return np.sign(s) * self(np.abs(s))

    @property
    def coefficients(self):
        return [(p.kind, p.a, p.b) for p in self.pieces]

    def check(self, n_samples: int = 1001, tol: float = 1e-10):
        """Verify continuity at the piece junctions, end points and monotonicity."""
        for left, right in zip(self.pieces[:-1], self.pieces[1:]):
            jump = abs(float(left(left.s1)) - float(right(right.s0)))
            if jump > tol * max(1.0, self.L):
                raise MapConstructionError(f"map discontinuous at s={left.s1}: jump {jump:g}")
        s = np.linspace(0.0, 1.0, n_samples)
        mu = self(s)
        if not np.all(np.isfinite(mu)) or np.any(np.diff(mu) <= 0):
            raise MapConstructionError("map construction failed: not strictly increasing")
        if abs(mu[0]) > tol * self.L or abs(mu[-1] - self.L) > tol * self.L:
            raise MapConstructionError("map construction failed: end points violated")
        return self


# ---------------------------------------------------------------------------
# detection of the concentration set


def _positive_superlevel(grid: Grid1D, f, delta0):
    f = np.asarray(f, dtype=float)
    fmax = np.max(f)
    if not fmax > 0:
        raise ValueError("empty field")
    pos = grid.nodes > 0
    if not np.any(pos):
        raise ValueError("grid has no positive node")
    first_positive = grid.nodes[pos][0]
    members = grid.nodes[pos & (f > delta0 * fmax)]
    return members, first_positive


def concentration_radius_one_bump(grid: Grid1D, f, delta0: float) -> float:
    """Outer radius of ``{v_j > 0 : f_j > delta0 * max f}``.

    Falls back to the first positive node when the set is empty.
    """
    members, first_positive = _positive_superlevel(grid, f, delta0)
    return float(members.max()) if members.size else float(first_positive)


def concentration_radii_two_bump(grid: Grid1D, f, delta0: float):
    """``(min, max)`` of ``{v_j > 0 : f_j > delta0 * max f}``."""
    members, first_positive = _positive_superlevel(grid, f, delta0)
    if not members.size:
        return float(first_positive), float(first_positive)
    return float(members.min()), float(members.max())


# ---------------------------------------------------------------------------
# map construction


def _linear(s0, s1, m0, m1):
    k = (m1 - m0) / (s1 - s0)
    return Piece("linear", s0, s1, k, m0 - k * s0)


def _quintic_through(s0, s1, m0, m1):
    """``a s^5 + b s`` through ``(s0, m0)`` and ``(s1, m1)``; None if not increasing."""
    A = np.array([[s0**5, s0], [s1**5, s1]])
    a, b = np.linalg.solve(A, [m0, m1])
    piece = Piece("quintic", s0, s1, float(a), float(b))
    # mu' = 5 a s^4 + b is monotone in s, so checking the end points suffices
    if min(5 * a * s0**4 + b, 5 * a * s1**4 + b) <= 0:
        return None
    return piece


def _sigmoid_through(s0, s1, m0, m1):
    """``a sigma(b s)`` through ``(s0, m0)`` and ``(s1, m1)`` with ``b > 0``.

    The ratio ``sigma(b s0) / sigma(b s1)`` equals 1 at ``b = 0`` and as
    ``b -> inf``, with a single interior minimum; the smaller root is taken.
    """
    target = m0 / m1

    def ratio(b):
        return _sigmoid(b * s0) / _sigmoid(b * s1)

    grid = np.geomspace(1e-6, 400.0 / s1, 400)
    k = int(np.argmin(ratio(grid)))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    b_star = minimize_scalar(ratio, bounds=(lo, hi), method="bounded",
                             options={"xatol": 1e-12}).x
    if not (ratio(b_star) < target < 1.0):
        return None
    b = brentq(lambda b: ratio(b) - target, 1e-12, b_star, xtol=1e-15, rtol=1e-15)
    a = m1 / _sigmoid(b * s1)
    return Piece("sigmoid", s0, s1, float(a), float(b))


def _tail(s0, m0, L, slope_before):
    """Piece from ``(s0, m0)`` to ``(1, L)``: convex quintic when the incoming
    slope is below the chord slope, logistic (concave) otherwise."""
    chord = (L - m0) / (1.0 - s0)
    if np.isclose(slope_before, chord, rtol=1e-12, atol=0):
        return _linear(s0, 1.0, m0, L)
    order = (_quintic_through, _sigmoid_through) if slope_before < chord else (
        _sigmoid_through, _quintic_through)
    for make in order:
        piece = make(s0, 1.0, m0, L)
        if piece is not None:
            return piece
    return _linear(s0, 1.0, m0, L)


def _head(s1, m1, slope_after):
    """Piece from ``(0, 0)`` to ``(s1, m1)`` joining the next piece with slope
    ``slope_after`` (C1): shifted logistic if concave, quintic if convex."""
    chord = m1 / s1
    if np.isclose(slope_after, chord, rtol=1e-12, atol=0):
        return _linear(0.0, s1, 0.0, m1)
    if slope_after > chord:
        a = (slope_after * s1 - m1) / (4 * s1**5)
        b = (5 * m1 / s1 - slope_after) / 4
        if b > 0:
            return Piece("quintic", 0.0, s1, float(a), float(b))
        return _linear(0.0, s1, 0.0, m1)
    # concave: a (sigma(b s) - 1/2) with a (sigma(y) - 1/2) = m1 and
    # a b sigma'(y) = slope_after where y = b s1
    target = slope_after * s1 / m1  # in (0, 1)

    def h(y):
        sig = _sigmoid(y)
        return y * sig * (1 - sig) / (sig - 0.5) - target

    if target <= 1e-12:
        return _linear(0.0, s1, 0.0, m1)
    hi = 1.0
    while h(hi) > 0 and hi < 1e3:
        hi *= 2
    if h(hi) > 0:
        return _linear(0.0, s1, 0.0, m1)
    y = brentq(h, 1e-9, hi, xtol=1e-15, rtol=1e-15)
    a = m1 / (_sigmoid(y) - 0.5)
    return Piece("sigmoid", 0.0, s1, float(a), float(y / s1), shift=float(a) / 2)


def build_map_one_bump(r: float, delta: float, L: float) -> MeshMap:
    """Linear on ``[0, delta]`` through ``(delta, r)``, then a tail to ``(1, L)``."""
    if not 0 < r < L:
        raise ValueError(f"need 0 < r < L, got r={r}, L={L}")
    if not 0 < delta < 1:
        raise ValueError(f"need 0 < delta < 1, got {delta}")
    head = _linear(0.0, delta, 0.0, r)
    tail = _tail(delta, r, L, r / delta)
    return MeshMap(BumpMode.ONE, delta, L, (r,), (head, tail)).check()


def build_map_two_bump(r1: float, r2: float, delta: float, L: float,
                       min_width: float = 0.0) -> MeshMap:
    """Map with ``mu(1/2 - delta/2) = r1`` and ``mu(1/2 + delta/2) = r2``.

    The middle piece is the chord between the two knots. ``r2 - r1`` is
    widened to ``min_width`` (typically one node spacing) so the chord keeps a
    positive slope.
    """
    if not 0 < r1 <= r2 < L:
        raise ValueError(f"need 0 < r1 <= r2 < L, got {r1}, {r2}, {L}")
    if not 0 < delta < 1:
        raise ValueError(f"need 0 < delta < 1, got {delta}")
    width = max(r2 - r1, min_width, 1e-12 * L)
    r2 = r1 + width
    if r2 >= L:
        raise MapConstructionError("map construction failed: r2 reaches the boundary")
    s1, s2 = 0.5 - 0.5 * delta, 0.5 + 0.5 * delta
    middle = _linear(s1, s2, r1, r2)
    k = middle.a
    head = _head(s1, r1, k)
    tail = _tail(s2, r2, L, k)
    return MeshMap(BumpMode.TWO, delta, L, (r1, r2), (head, middle, tail)).check()


# ---------------------------------------------------------------------------
# regridding


def uniform_s_nodes(n: int) -> np.ndarray:
    """Cell-centred uniform nodes on ``[-1, 1]``."""
    return -1.0 + (np.arange(n) + 0.5) * (2.0 / n)


def refine(grid: Grid1D, f, mmap: MeshMap, s_nodes=None):
    """Push ``s_nodes`` through ``mmap`` and transfer ``f`` conservatively.

    Returns ``(new_grid, new_values)``; ``f`` may be 1-D or carry leading
    axes (each row is moved and rescaled to its own mass).
    """
    if s_nodes is None:
        s_nodes = uniform_s_nodes(len(grid))
    if not np.isclose(mmap.L, grid.half_length):
        raise ValueError("map and grid disagree on the domain length")
    new_grid = Grid1D(mmap.odd(s_nodes), grid.half_length)
    f = np.asarray(f, dtype=float)
    mass = quadrature_mass(grid, f)
    values = interpolate(grid, f, new_grid.nodes, axis=-1)
    return new_grid, rescale_mass(new_grid, values, mass)


def build_map(grid: Grid1D, profile, mode: BumpMode, delta0: float, delta: float) -> MeshMap:
    """Detect the concentration set of ``profile`` and build the matching map.

    In two-bump mode a level set that already touches the first positive node
    is a single bump centred at 0 and is treated as such.
    """
    mode = BumpMode(mode)
    L = grid.half_length
    if mode is BumpMode.ONE:
        r = concentration_radius_one_bump(grid, profile, delta0)
        return build_map_one_bump(r, delta, L)
    r1, r2 = concentration_radii_two_bump(grid, profile, delta0)
    first_positive = grid.nodes[grid.nodes > 0][0]
    if r1 <= first_positive:
        return build_map_one_bump(r2, delta, L)
    i = np.searchsorted(grid.nodes, r1)
    spacing = grid.nodes[min(i + 1, len(grid) - 1)] - grid.nodes[i - 1]
    return build_map_two_bump(r1, r2, delta, L, min_width=0.5 * spacing)


def adapt_grid(grid: Grid1D, profile, mode: BumpMode, delta0: float, delta: float) -> Grid1D:
    """New grid adapted to ``profile``; the old grid is kept if no map can be built."""
    try:
        mmap = build_map(grid, profile, mode, delta0, delta)
    except MapConstructionError:
        return grid
    return Grid1D(mmap.odd(uniform_s_nodes(len(grid))), grid.half_length)
