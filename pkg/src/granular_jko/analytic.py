"""Self-similar shear solutions for ``gamma = 2`` (and the ``gamma > 2`` ODE variant).

The ansatz ``f = m(t) phi(a(t) (v - b(t) x)^2)`` with ``rho = m / sqrt(a)``
reduces the kinetic equation to

    rho' = -b rho,    m' = (lam/2) rho^(1+beta) m^(1-beta),    b' = -b^2,

with ``beta = gamma - 2``. For ``beta = 0`` everything is explicit:
``b = -1/(T - t)``, ``rho = rho0 T / (T - t)`` and
``m = m0 (T / (T - t))^(lam rho0 T / 2)`` with ``T = -1/b0``.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import quad, solve_ivp

from .grid import Grid1D

__all__ = [
    "SelfSimilarParams",
    "Criticality",
    "closed_form",
    "integrate_ode",
    "classify_threshold",
    "characteristic_gamma2",
    "characteristic_gamma_gt2",
    "integrate_characteristic",
    "xv_condition",
    "burgers_blowup_time",
    "bump_profile",
    "self_similar_density",
    "write_selfsimilar_csv",
    "write_characteristics_csv",
]


@dataclass(frozen=True)
class SelfSimilarParams:
    rho0: float
    m0: float
    b0: float
    lam: float
    beta: float = 0.0

    def __post_init__(self):
        if not (self.rho0 > 0 and self.m0 > 0 and self.b0 < 0):
            raise ValueError("need rho0 > 0, m0 > 0 and b0 < 0")
        if self.lam < 0 or self.beta < 0:
            raise ValueError("lam and beta must be nonnegative")

    @property
    def T(self) -> float:
        """Blow-up time ``-1/b0``."""
        return -1.0 / self.b0

    @property
    def criticality_number(self) -> float:
        """``lam rho0 T``; the width shrinks iff it exceeds 2."""
        return self.lam * self.rho0 * self.T


class Criticality(str, enum.Enum):
    SUPERCRITICAL = "supercritical"
    CRITICAL = "critical"
    SUBCRITICAL = "subcritical"


def closed_form(p: SelfSimilarParams, t: float):
    """``(rho, m, b, 1/sqrt(a))`` at time ``t`` for the exact ``gamma = 2`` case."""
    if p.beta != 0:
        raise ValueError("closed form only exists for beta = 0")
    T = p.T
    if not 0 <= t < T:
        raise ValueError("past blow-up" if t >= T else "t must be nonnegative")
    r = T / (T - t)
    rho = p.rho0 * r
    m = p.m0 * r ** (0.5 * p.lam * p.rho0 * T)
    return rho, m, -1.0 / (T - t), rho / m


def _rhs(p: SelfSimilarParams):
    half = 0.5 * p.lam
    beta = p.beta

    def f(rho, m, b):
        return -b * rho, half * rho ** (1 + beta) * m ** (1 - beta), -b * b

    return f


def integrate_ode(p: SelfSimilarParams, t_end: float, dt: float):
    """Classical RK4 for ``(rho, m, b)`` up to ``t_end`` with steps of at most ``dt``."""
    if not 0 <= t_end < p.T:
        raise ValueError("integration would straddle the blow-up time")
    n = max(1, math.ceil(t_end / dt - 1e-12))
    h = t_end / n
    f = _rhs(p)
    rho, m, b = p.rho0, p.m0, p.b0
    for _ in range(n):
        k1 = f(rho, m, b)
        k2 = f(rho + 0.5 * h * k1[0], m + 0.5 * h * k1[1], b + 0.5 * h * k1[2])
        k3 = f(rho + 0.5 * h * k2[0], m + 0.5 * h * k2[1], b + 0.5 * h * k2[2])
        k4 = f(rho + h * k3[0], m + h * k3[1], b + h * k3[2])
        rho += h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        m += h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        b += h / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
    return rho, m, b


def classify_threshold(lam: float, rho0: float, T: float, tol: float = 1e-12) -> Criticality:
    """Compare ``lam rho0 T`` with 2."""
    if not (lam > 0 and rho0 > 0 and T > 0):
        raise ValueError("inputs must be positive")
    c = lam * rho0 * T
    if abs(c - 2.0) <= tol:
        return Criticality.CRITICAL
    return Criticality.SUPERCRITICAL if c > 2.0 else Criticality.SUBCRITICAL


def characteristic_gamma2(p: SelfSimilarParams, x: float, v: float, t: float) -> float:
    """Position ``X(t)`` of the characteristic through ``(x, v)`` at time 0.

    Uses the conserved ``alpha = sqrt(a) (V - b X)``; the critical case
    ``lam rho0 T = 2`` is rejected.
    """
    if p.beta != 0:
        raise ValueError("formula requires beta = 0")
    T = p.T
    if not 0 <= t < T:
        raise ValueError("t must lie in [0, T)")
    k = 1.0 - 0.5 * p.criticality_number
    if abs(k) < 1e-12:
        raise ValueError("critical parameters: formula degenerates")
    alpha = (p.m0 / p.rho0) * (v + x / T)
    growth = ((T / (T - t)) ** k - 1.0) / k
    return (T - t) * (x / T + alpha * p.rho0 / p.m0 * growth)


def characteristic_gamma_gt2(X0: float, alpha: float, C: float, T: float, t: float):
    """``X(t) = ((T - t)/T) (X0 + alpha C T log(T/(T - t)))`` and its first zero.

    Returns ``(X, t_cross)``; ``t_cross`` is None unless ``X0 < 0 < alpha``,
    in which case the logarithm guarantees a crossing before ``T``.
    """
    if not (C > 0 and T > 0 and 0 <= t < T):
        raise ValueError("need C > 0 and 0 <= t < T")
    X = (T - t) / T * (X0 + alpha * C * T * math.log(T / (T - t)))
    t_cross = None
    if X0 < 0 < alpha:
        t_cross = T * (1.0 - math.exp(X0 / (alpha * C * T)))
    return X, t_cross


def integrate_characteristic(p: SelfSimilarParams, x: float, v: float, t_end: float,
                             dt: float):
    """RK4 for ``X' = V, V' = -(lam/2) a^(-beta/2) rho (V - b X)`` with the moment ODE.

    Returns ``(X, V, alpha)`` at ``t_end`` where ``alpha = sqrt(a) (V - b X)``.
    """
    if not 0 <= t_end < p.T:
        raise ValueError("integration would straddle the blow-up time")
    half, beta = 0.5 * p.lam, p.beta

    def f(y):
        rho, m, b, X, V = y
        inv_sqrt_a = rho / m
        return np.array([
            -b * rho,
            half * rho ** (1 + beta) * m ** (1 - beta),
            -b * b,
            V,
            -half * inv_sqrt_a**beta * rho * (V - b * X),
        ])

    n = max(1, math.ceil(t_end / dt - 1e-12))
    h = t_end / n
    y = np.array([p.rho0, p.m0, p.b0, x, v], dtype=float)
    for _ in range(n):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    rho, m, b, X, V = y
    return X, V, (m / rho) * (V - b * X)


def xv_condition(p: SelfSimilarParams, x: float, v: float) -> bool:
    """``-x/T < v < -(x/T) (lam/2) rho0 T``; empty band when subcritical."""
    lo = -x / p.T
    hi = lo * 0.5 * p.criticality_number
    return bool(lo < v < hi)


def burgers_blowup_time(g, v_grid: Grid1D) -> float:
    """``1 / (2 max g)`` over the grid nodes (kernel ``|v|``)."""
    values = np.asarray(g(v_grid.nodes) if callable(g) else g, dtype=float)
    peak = float(values.max())
    if not peak > 0:
        raise ValueError("profile has no positive values")
    return 1.0 / (2.0 * peak)


def _raw_bump(z):
    # smooth on z = y^2 in [0, 1/4); zero outside
    z = np.asarray(z, dtype=float)
    inside = z < 0.25
    out = np.zeros_like(z)
    out[inside] = np.exp(-1.0 / (1.0 - 4.0 * z[inside]))
    return out


_BUMP_NORM = quad(lambda y: float(_raw_bump(y * y)), -0.5, 0.5, epsabs=1e-14)[0]


def bump_profile(z):
    """Compactly supported ``phi(z)`` with ``int phi(y^2) dy = 1`` (support ``|y| < 1/2``)."""
    return _raw_bump(z) / _BUMP_NORM


def self_similar_density(p: SelfSimilarParams, t: float, x, v):
    """``m phi(a (v - b x)^2)`` for the exact ``gamma = 2`` solution."""
    _, m, b, inv_sqrt_a = closed_form(p, t)
    y = (np.asarray(v) - b * np.asarray(x)) / inv_sqrt_a
    return m * bump_profile(y * y)


def write_selfsimilar_csv(path, p: SelfSimilarParams, times) -> Path:
    """Columns ``t, rho, m, b, inv_sqrt_a``.

    Uses the closed form when ``beta = 0`` and an adaptive Runge-Kutta
    integration (``times`` must be increasing) otherwise.
    """
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "rho", "m", "b", "inv_sqrt_a"])
        times = np.asarray(times, dtype=float)
        if p.beta == 0:
            states = [closed_form(p, t)[:3] for t in times]
        else:
            f = _rhs(p)
            sol = solve_ivp(lambda t, y: f(*y), (0.0, float(times.max())), [p.rho0, p.m0, p.b0],
                            method="DOP853", t_eval=times, rtol=1e-11, atol=1e-14)
            if not sol.success:
                raise RuntimeError(sol.message)
            states = sol.y.T
        for t, (rho, m, b) in zip(times, states):
            w.writerow([repr(float(t)), repr(float(rho)), repr(float(m)), repr(float(b)),
                        repr(float(rho / m))])
    return path


def write_characteristics_csv(path, p: SelfSimilarParams, starts, times) -> Path:
    """Columns ``x0, v0, t, X`` for ``gamma = 2`` characteristics."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x0", "v0", "t", "X"])
        for x0, v0 in starts:
            for t in times:
                w.writerow([repr(float(x0)), repr(float(v0)), repr(float(t)),
                            repr(characteristic_gamma2(p, x0, v0, t))])
    return path
