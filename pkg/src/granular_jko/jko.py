"""Fisher-regularised JKO step for the collision operator on a non-uniform grid.

One implicit step of ``f_t = d_v (f d_v (K * f))`` is the minimiser of

.. math::

    J(f, m) = \\sum_{j} \\Big[ \\frac{2 m_{j-1/2}^2}{f_j + f_{j-1}}
        + \\frac{\\Delta t^2}{\\beta^2 \\Delta v_j^2} (\\log f_j - \\log f_{j-1})^2
          \\frac{f_j + f_{j-1}}{2} \\Big] \\Delta v_j
        + \\Delta t \\sum_{i,l} K_{il} f_i f_l h_i h_l

subject to ``f_j - f^{prev}_j + (m_{j+1/2} - m_{j-1/2}) / h_j = 0`` with zero
boundary fluxes. ``K = scale * W`` carries the inelasticity strength.

The problem is solved by sequential quadratic programming: each iterate
minimises a quadratic model of ``J`` whose Hessian is that of the transport
and Fisher part ``F`` (the interaction energy is concave on mass-preserving
perturbations and is left out). Because the ``f``-block of the constraint is
the identity, eliminating ``f`` leaves a banded SPD system in the flux
update, so many independent solves sharing one velocity grid run as a batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps

from .grid import FLOOR, Grid1D
from .kernels import KernelSpec, kernel_matrix

__all__ = [
    "JkoOptions",
    "JkoState",
    "CollisionProblem",
    "assemble_kernel",
    "energy",
    "objective",
    "objective_gradient",
    "constraint_matrix",
    "solve_collision",
    "solve_collision_batch",
]


@dataclass(frozen=True)
class JkoOptions:
    """Solver settings.

    Parameters
    ----------
    beta : float
        Fisher regularisation strength; the penalty scales like ``beta**-2``.
    omega : float
        SQP relaxation step in ``(0, 1]``.
    max_iter, tol : int, float
        Iteration cap and relative-update stopping threshold.
    diag_floor : float
        Lower bound added to / imposed on the model Hessian diagonal.
    hessian : {"banded", "diagonal"}
        ``"banded"`` uses the exact Hessian of ``F`` (pentadiagonal after
        eliminating ``f``); ``"diagonal"`` keeps only its diagonal.
    line_search : {"armijo", "positivity"}
        ``"positivity"`` halves ``omega`` only while ``f`` would turn
        nonpositive; ``"armijo"`` also requires sufficient decrease of ``J``.
    """

    beta: float = 1.0
    omega: float = 1.0
    max_iter: int = 500
    tol: float = 1e-6
    diag_floor: float = 1e-8
    hessian: str = "banded"
    line_search: str = "armijo"

    def __post_init__(self):
        if not (self.beta > 0 and 0 < self.omega <= 1 and self.max_iter > 0
                and self.tol > 0 and self.diag_floor > 0):
            raise ValueError(f"invalid JKO options {self}")
        if self.hessian not in ("banded", "diagonal"):
            raise ValueError(f"unknown Hessian model {self.hessian!r}")
        if self.line_search not in ("positivity", "armijo"):
            raise ValueError(f"unknown line search {self.line_search!r}")


@dataclass
class JkoState:
    """Unknowns of one solve: densities at nodes, fluxes at the interior half nodes."""

    f: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=float)
        self.m = np.asarray(self.m, dtype=float)
        if self.m.shape[-1] != self.f.shape[-1] - 1:
            raise ValueError("m must have one entry fewer than f")

    def as_vector(self):
        return np.concatenate([self.f, self.m], axis=-1)

    @classmethod
    def from_vector(cls, u, n):
        u = np.asarray(u, dtype=float)
        return cls(u[..., :n], u[..., n:])


def assemble_kernel(v_grid: Grid1D, kspec: KernelSpec) -> np.ndarray:
    """``kspec.scale * W(v_i - v_l)``."""
    return kspec.scale * kernel_matrix(kspec, v_grid.nodes)


def energy(f, v_grid: Grid1D, kspec: KernelSpec) -> float:
    """Discrete interaction energy ``sum_{i,l} K_il f_i f_l h_i h_l``."""
    fh = np.asarray(f, dtype=float) * v_grid.weights
    K = assemble_kernel(v_grid, kspec)
    out = np.einsum("...i,ij,...j->...", fh, K, fh)
    return out if np.ndim(out) else float(out)


class CollisionProblem:
    """Grid-dependent data shared by every solve on one velocity grid."""

    def __init__(self, v_grid: Grid1D, kspec: KernelSpec, dt: float, opts: JkoOptions):
        if not dt >= 0:
            raise ValueError("dt must be nonnegative")
        self.grid = v_grid
        self.kspec = kspec
        self.dt = float(dt)
        self.opts = opts
        self.n = len(v_grid)
        self.h = v_grid.weights
        self.dv = np.diff(v_grid.nodes)
        self.K = assemble_kernel(v_grid, kspec)
        # Fisher weight beta^-2 dt^2 / dv^2, already multiplied by dv
        self.cf = (self.dt / opts.beta) ** 2 / self.dv

    # (D m)_j = (m_{j+1/2} - m_{j-1/2}) / h_j with zero boundary fluxes
    def div(self, m):
        pad = np.zeros(m.shape[:-1] + (1,))
        return np.diff(np.concatenate([pad, m, pad], axis=-1), axis=-1) / self.h

    def div_T(self, g):
        gh = g / self.h
        return gh[..., :-1] - gh[..., 1:]

    def _intervals(self, f):
        s = f[..., 1:] + f[..., :-1]
        d = np.log(f[..., 1:]) - np.log(f[..., :-1])
        return f[..., :-1], f[..., 1:], s, d

    def value(self, f, m):
        _, _, s, d = self._intervals(f)
        F = np.sum(2 * m**2 * self.dv / s + 0.5 * self.cf * d**2 * s, axis=-1)
        fh = f * self.h
        return F + self.dt * np.einsum("...i,ij,...j->...", fh, self.K, fh)

    def gradient(self, f, m):
        a, c, s, d = self._intervals(f)
        gm = 4 * m * self.dv / s
        common = -2 * m**2 * self.dv / s**2 + 0.5 * self.cf * d**2
        gf = np.zeros_like(f)
        gf[..., 1:] += common + self.cf * d * s / c
        gf[..., :-1] += common - self.cf * d * s / a
        gf += 2 * self.dt * self.h * ((f * self.h) @ self.K)
        return gf, gm

    def hessian_diag(self, f, m):
        """Diagonal of the Hessian of ``F``, floored at ``diag_floor``."""
        a, c, s, d = self._intervals(f)
        hm = 4 * self.dv / s
        common = 4 * m**2 * self.dv / s**3
        hf = np.zeros_like(f)
        hf[..., 1:] += common + self.cf * (s / c**2 + 2 * d / c - d * s / c**2)
        hf[..., :-1] += common + self.cf * (s / a**2 - 2 * d / a + d * s / a**2)
        floor = self.opts.diag_floor
        return np.maximum(hf, floor), np.maximum(hm, floor)

    def _reduced_diagonal(self, f, m):
        """Bands of ``H_m + D^T H_f D`` for the diagonal model."""
        hf, hm = self.hessian_diag(f, m)
        w = hf / self.h**2
        b0 = hm + w[..., :-1] + w[..., 1:]
        b2 = np.zeros(b0.shape[:-1] + (max(b0.shape[-1] - 2, 0),))
        return b0, -w[..., 1:-1], b2

    def _reduced_banded(self, f, m):
        """Bands of the exact reduced Hessian of ``F``.

        With ``f = b - D m`` the Hessian in ``m`` is
        ``H_mm - H_mf D - D^T H_fm + D^T H_ff D``, which is pentadiagonal.
        """
        a, c, s, d = self._intervals(f)
        dv, cf = self.dv, self.cf
        hmm = 4 * dv / s
        hmx = -4 * m * dv / s**2
        hxx = 4 * m**2 * dv / s**3
        haa = hxx + cf * (s / a**2 - 2 * d / a + d * s / a**2)
        hcc = hxx + cf * (s / c**2 + 2 * d / c - d * s / c**2)
        hac = hxx + cf * (-s / (a * c) + d / c - d / a)
        Fd = np.zeros_like(f)
        Fd[..., :-1] += haa
        Fd[..., 1:] += hcc
        p = 1 / self.h[:-1]   # D[k, k]
        q = -1 / self.h[1:]   # D[k+1, k]
        b0 = hmm + p**2 * Fd[..., :-1] + 2 * p * q * hac + q**2 * Fd[..., 1:] - 2 * hmx * (p + q)
        b1 = (p[:-1] * hac[..., :-1] * p[1:] + q[:-1] * Fd[..., 1:-1] * p[1:]
              + q[:-1] * hac[..., 1:] * q[1:]
              - hmx[..., :-1] * p[1:] - hmx[..., 1:] * q[:-1])
        b2 = q[:-2] * hac[..., 1:-1] * p[2:]
        return b0 + self.opts.diag_floor, b1, b2

    def newton_direction(self, f, m):
        """Solve the SQP subproblem; returns the feasible step and the gradient."""
        gf, gm = self.gradient(f, m)
        rhs = -gm + self.div_T(gf)
        if self.opts.hessian == "banded":
            dm, ok = _solve_pentadiagonal(*self._reduced_banded(f, m), rhs)
            if not np.all(ok):
                # indefinite Fisher block: fall back to the diagonal model
                bad = ~ok
                dm[bad], _ = _solve_pentadiagonal(*self._reduced_diagonal(f[bad], m[bad]), rhs[bad])
        else:
            dm, _ = _solve_pentadiagonal(*self._reduced_diagonal(f, m), rhs)
        return -self.div(dm), dm, gf, gm


def _solve_pentadiagonal(b0, b1, b2, rhs):
    """Batched banded ``L D L^T`` solve of a symmetric pentadiagonal system.

    ``b0`` is the diagonal, ``b1``/``b2`` the first and second superdiagonals.
    Returns the solution and a per-row flag that is False when a pivot was
    not positive.
    """
    n = b0.shape[-1]
    D = np.empty_like(b0)
    L1 = np.zeros_like(b0)
    L2 = np.zeros_like(b0)
    y = np.empty_like(rhs)
    with np.errstate(all="ignore"):
        for i in range(n):
            di = b0[..., i].copy()
            yi = rhs[..., i].copy()
            if i >= 1:
                di -= L1[..., i - 1] ** 2 * D[..., i - 1]
                yi -= L1[..., i - 1] * y[..., i - 1]
            if i >= 2:
                di -= L2[..., i - 2] ** 2 * D[..., i - 2]
                yi -= L2[..., i - 2] * y[..., i - 2]
            D[..., i] = di
            y[..., i] = yi
            if i + 1 < n:
                num = b1[..., i].copy()
                if i >= 1:
                    num -= L2[..., i - 1] * L1[..., i - 1] * D[..., i - 1]
                L1[..., i] = num / di
            if i + 2 < n:
                L2[..., i] = b2[..., i] / di
        x = y / D
        for i in range(n - 2, -1, -1):
            x[..., i] -= L1[..., i] * x[..., i + 1]
            if i + 2 < n:
                x[..., i] -= L2[..., i] * x[..., i + 2]
    ok = np.all(D > 0, axis=-1) & np.all(np.isfinite(x), axis=-1)
    return x, ok


def objective(u: JkoState, f_prev, dt: float, opts: JkoOptions, v_grid: Grid1D,
              kspec: KernelSpec) -> float:
    """``J(f, m) = F(f, m) + dt * E(f)``; ``f_prev`` enters only through the constraint."""
    if np.any(u.f <= 0):
        raise ValueError("positivity violated")
    prob = CollisionProblem(v_grid, kspec, dt, opts)
    out = prob.value(u.f, u.m)
    return out if np.ndim(out) else float(out)


def objective_gradient(u: JkoState, dt: float, opts: JkoOptions, v_grid: Grid1D,
                       kspec: KernelSpec) -> JkoState:
    prob = CollisionProblem(v_grid, kspec, dt, opts)
    gf, gm = prob.gradient(u.f, u.m)
    return JkoState(gf, gm)


def constraint_matrix(v_grid: Grid1D):
    """Sparse ``A`` (``N x (2N-1)``) with ``A u = b`` and ``b = f_prev``.

    Returns ``(A, rhs)`` where ``rhs(f_prev)`` builds ``b``.
    """
    n = len(v_grid)
    h = v_grid.weights
    rows = np.arange(n - 1)
    D = sps.coo_matrix(
        (np.concatenate([1 / h[:-1], -1 / h[1:]]),
         (np.concatenate([rows, rows + 1]), np.concatenate([rows, rows]))),
        shape=(n, n - 1),
    )
    A = sps.hstack([sps.identity(n), D]).tocsr()
    return A, lambda f_prev: np.asarray(f_prev, dtype=float).copy()


def solve_collision_batch(f_prev, dt: float, v_grid: Grid1D, kspec: KernelSpec,
                          opts: JkoOptions = JkoOptions(), problem: CollisionProblem | None = None):
    """Run independent collision solves for every row of ``f_prev``.

    Returns ``(f_next, exit_flags, iterations)``. Rows that hit ``max_iter``,
    or whose step could not be kept positive, carry exit flag 1 and their
    last feasible iterate.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    prob = problem or CollisionProblem(v_grid, kspec, dt, opts)
    b = np.maximum(np.atleast_2d(np.asarray(f_prev, dtype=float)), FLOOR)
    nb, n = b.shape
    m = np.zeros((nb, n - 1))
    f = b.copy()
    active = np.ones(nb, dtype=bool)
    flags = np.zeros(nb, dtype=int)
    iters = np.zeros(nb, dtype=int)
    armijo = opts.line_search == "armijo"

    for _ in range(opts.max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        fa, ma, ba = f[idx], m[idx], b[idx]
        with np.errstate(all="ignore"):
            df, dm, gf, gm = prob.newton_direction(fa, ma)
            bad = ~(np.all(np.isfinite(dm), axis=1) & np.all(np.isfinite(df), axis=1))
            omega = np.full(idx.size, opts.omega)
            if armijo:
                j0 = prob.value(fa, ma)
                slope = np.sum(gf * df, axis=1) + np.sum(gm * dm, axis=1)
            for _ in range(60):
                mt = ma + omega[:, None] * dm
                # recompute f from the constraint so feasibility never drifts
                ft = ba - prob.div(mt)
                ok = np.all(ft > 0, axis=1)
                if armijo:
                    jt = prob.value(np.where(ok[:, None], ft, 1.0), mt)
                    ok &= jt <= j0 + 1e-4 * omega * slope + 1e-13 * np.abs(j0)
                ok |= bad
                if np.all(ok):
                    break
                omega = np.where(ok, omega, 0.5 * omega)
        bad |= ~ok
        step = np.sqrt(np.sum((mt - ma) ** 2, axis=1) + np.sum((ft - fa) ** 2, axis=1))
        size = np.sqrt(np.sum(ma**2, axis=1) + np.sum(fa**2, axis=1))
        good = ~bad
        m[idx[good]] = mt[good]
        f[idx[good]] = ft[good]
        iters[idx] += 1
        converged = good & (step <= opts.tol * size)
        flags[idx[bad]] = 1
        active[idx[bad | converged]] = False
    flags[active] = 1
    return f, flags, iters


def solve_collision(f_prev, dt: float, v_grid: Grid1D, kspec: KernelSpec,
                    opts: JkoOptions = JkoOptions(), return_info: bool = False):
    """One regularised JKO collision step for a single velocity profile.

    Returns ``(f_next, exit_flag)``; with ``return_info`` also a dict holding
    the iteration count.
    """
    f, flags, iters = solve_collision_batch(f_prev, dt, v_grid, kspec, opts)
    if return_info:
        return f[0], int(flags[0]), {"iterations": int(iters[0])}
    return f[0], int(flags[0])
