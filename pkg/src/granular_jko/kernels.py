"""Power-law interaction kernels ``W(v) = |v|**gamma / gamma``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["KernelSpec", "kernel_value", "kernel_grad", "kernel_matrix"]


@dataclass(frozen=True)
class KernelSpec:
    """Power-law kernel description.

    Parameters
    ----------
    gamma : float
        Exponent, ``gamma >= 1``.
    normalized : bool
        If True use ``|v|**gamma / gamma``, otherwise ``|v|**gamma``.
    scale : float
        Overall multiplier applied when the kernel is assembled into an
        energy. Drivers set it to ``lambda / 2``.
    """

    gamma: float
    normalized: bool = True
    scale: float = 1.0

    def __post_init__(self):
        if not self.gamma >= 1.0:
            raise ValueError(f"gamma must be >= 1, got {self.gamma}")
        if self.scale < 0:
            raise ValueError(f"scale must be nonnegative, got {self.scale}")

    @property
    def prefactor(self) -> float:
        return 1.0 / self.gamma if self.normalized else 1.0


def kernel_value(spec: KernelSpec, v):
    """Evaluate ``W(v)``; exact zero at ``v = 0``."""
    a = np.abs(np.asarray(v, dtype=float))
    out = spec.prefactor * a**spec.gamma
    return out if out.ndim else float(out)


def kernel_grad(spec: KernelSpec, v):
    """Evaluate ``W'(v) = prefactor * gamma * sign(v) |v|**(gamma - 1)``.

    For ``gamma == 1`` the value at ``v = 0`` is 0 (midpoint of the jump).
    """
    v = np.asarray(v, dtype=float)
    out = spec.prefactor * spec.gamma * np.sign(v) * np.abs(v) ** (spec.gamma - 1.0)
    return out if out.ndim else float(out)


def kernel_matrix(spec: KernelSpec, v_nodes) -> np.ndarray:
    """Pairwise matrix ``W(v_i - v_l)`` (symmetric, zero diagonal).

    ``spec.scale`` is *not* applied here; see :func:`granular_jko.jko.assemble_kernel`.
    """
    v = np.asarray(v_nodes, dtype=float)
    if v.ndim != 1:
        raise ValueError("v_nodes must be one-dimensional")
    if v.size > 1 and np.any(np.diff(v) <= 0):
        raise ValueError("v_nodes must be strictly increasing")
    diff = v[:, None] - v[None, :]
    K = kernel_value(spec, diff)
    K = np.atleast_2d(K)
    np.fill_diagonal(K, 0.0)
    return 0.5 * (K + K.T)
