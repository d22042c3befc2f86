"""Compactly supported kernels and window weights.

All kernels live on the closed Euclidean unit ball: K(u) = 0 whenever
||u|| > 1, and c_lo <= K(u) <= c_hi on the support.  The closed-ball
convention (points at distance exactly h keep their weight) makes
neighbor sets stable under exact-distance ties.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "KernelSpec",
    "TRIANGULAR",
    "UNIFORM",
    "custom_kernel",
    "kernel_weight",
    "kernel_weights",
]


@dataclass(frozen=True)
class KernelSpec:
    """A kernel given by a radial profile on [0, 1].

    ``profile`` maps the norm t = ||u|| (array of values in [0, 1]) to
    kernel values; it must stay within [c_lo, c_hi] there.
    """

    name: str
    c_lo: float
    c_hi: float
    profile: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self):
        if not (0 < self.c_lo <= self.c_hi):
            raise ValueError("kernel bounds must satisfy 0 < c_lo <= c_hi")

    def evaluate(self, norms):
        """Kernel value at the given norms; zero outside the closed unit ball."""
        t = np.asarray(norms, dtype=float)
        inside = t <= 1.0
        out = np.zeros_like(t)
        if np.any(inside):
            out[inside] = self.profile(t[inside])
        return out


TRIANGULAR = KernelSpec("triangular_shifted", 1.0, 2.0, lambda t: 2.0 - t)
UNIFORM = KernelSpec("uniform", 1.0, 1.0, lambda t: np.ones_like(t))


def custom_kernel(c_lo, c_hi, profile, name="custom"):
    """Wrap a user radial profile as a KernelSpec."""
    return KernelSpec(name, float(c_lo), float(c_hi), profile)


def kernel_weight(spec: KernelSpec, x, xi, h: float) -> float:
    """Weight K((x - xi) / h) of sample xi for a query at x.

    Exactly zero when ||x - xi|| > h; within [c_lo, c_hi] otherwise.
    """
    if h <= 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    norm = float(np.linalg.norm(x - xi))
    return float(spec.evaluate(norm / h))


def kernel_weights(spec: KernelSpec, x, points, h: float) -> np.ndarray:
    """Vector of weights K((x - X_i) / h) over the rows of ``points``."""
    if h <= 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    norms = np.linalg.norm(pts - x[None, :], axis=1)
    return spec.evaluate(norms / h)
