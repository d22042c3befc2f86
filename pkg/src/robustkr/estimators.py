"""Pointwise regression estimators.

Four local estimators share the same window structure (samples within
bandwidth h of the query, weighted by the kernel): a Huber-loss
M-estimator solved by bisection, clipped Nadaraya-Watson, median-of-means
over a fixed random partition, and a symmetrically trimmed mean.  Every
estimate is clipped to [-M, M].

Degenerate windows: a query with no sample within h returns value 0 with
n_window = 0 (the loss is constant there, so any value ties; zero is the
deterministic choice).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .data import Dataset, substream, STREAM_SAMPLING
from .kernels import KernelSpec, TRIANGULAR, kernel_weights

__all__ = [
    "HuberParams",
    "PointEstimate",
    "huber_loss",
    "huber_grad",
    "huber_argmin",
    "fit_huber",
    "fit_nw",
    "fit_mom",
    "fit_trimmed",
    "mom_partition",
    "huber_estimator",
    "nw_estimator",
    "mom_estimator",
    "trimmed_estimator",
]

# Default solver tolerance is tol = DEFAULT_TOL_FACTOR * M, far below the
# statistical error at any tested sample size.
DEFAULT_TOL_FACTOR = 1e-6


@dataclass(frozen=True)
class HuberParams:
    """Estimator triple: bandwidth h, Huber threshold T, clip bound M."""

    h: float
    T: float
    M: float

    def __post_init__(self):
        if self.h <= 0 or self.T <= 0 or self.M <= 0:
            raise ValueError("h, T and M must all be strictly positive")


@dataclass(frozen=True)
class PointEstimate:
    """An estimate at one query point plus the in-window sample count."""

    value: float
    n_window: int


def huber_loss(u, T: float):
    """u^2 below the threshold, 2T|u| - T^2 above; continuous and convex."""
    if T <= 0:
        raise ValueError("T must be positive")
    u = np.asarray(u, dtype=float)
    au = np.abs(u)
    out = np.where(au <= T, u * u, 2.0 * T * au - T * T)
    return out if out.ndim else float(out)


def huber_grad(u, T: float):
    """Derivative of :func:`huber_loss`: 2u inside [-T, T], saturating at +-2T."""
    if T <= 0:
        raise ValueError("T must be positive")
    u = np.asarray(u, dtype=float)
    out = np.clip(2.0 * u, -2.0 * T, 2.0 * T)
    return out if out.ndim else float(out)


def huber_argmin(labels, weights, T: float, M: float, tol: float) -> float:
    """Minimize sum_i w_i * huber_loss(y_i - s) over s in [-M, M].

    The objective is convex in s, so its derivative
    g(s) = -sum_i w_i * huber_grad(y_i - s) is nondecreasing; bisection on
    the sign change takes O(log(M / tol)) iterations.  When g vanishes on
    a whole interval the bisection from the canonical bracket [-M, M]
    fixes the returned point, which is the deterministic tie rule.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    y = np.asarray(labels, dtype=float)
    w = np.asarray(weights, dtype=float)

    def g(s):
        return -float(np.dot(w, huber_grad(y - s, T)))

    if g(-M) >= 0.0:
        return -M
    if g(M) <= 0.0:
        return M
    lo, hi = -M, M
    for _ in range(max(1, math.ceil(math.log2(2.0 * M / tol)))):
        mid = 0.5 * (lo + hi)
        if g(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _window_data(data: Dataset, kernel: KernelSpec, h: float, x):
    idx = data.window(x, h)
    if idx.size == 0:
        return idx, None, None
    w = kernel_weights(kernel, x, data.points[idx], h)
    return idx, data.labels[idx], w


def fit_huber(
    data: Dataset,
    params: HuberParams,
    kernel: KernelSpec,
    x,
    tol: Optional[float] = None,
) -> PointEstimate:
    """Huber M-estimate at x: argmin over s in [-M, M] of the
    kernel-weighted Huber loss of the residuals."""
    if tol is None:
        tol = DEFAULT_TOL_FACTOR * params.M
    idx, labels, weights = _window_data(data, kernel, params.h, x)
    if idx.size == 0:
        return PointEstimate(0.0, 0)
    value = huber_argmin(labels, weights, params.T, params.M, tol)
    return PointEstimate(value, int(idx.size))


def _clip(v: float, M: float) -> float:
    return float(min(max(v, -M), M))


def fit_nw(data: Dataset, h: float, kernel: KernelSpec, M: float, x) -> PointEstimate:
    """Clipped Nadaraya-Watson: kernel-weighted label average, clipped to [-M, M]."""
    idx, labels, weights = _window_data(data, kernel, h, x)
    if idx.size == 0:
        return PointEstimate(0.0, 0)
    value = float(np.dot(weights, labels) / weights.sum())
    return PointEstimate(_clip(value, M), int(idx.size))


def mom_partition(n: int, groups: int, seed: int) -> np.ndarray:
    """Group id (0..groups-1) per sample: a seeded random near-equal split.

    Computed once per (dataset, seed) and reused across query points.
    """
    if groups < 1:
        raise ValueError("groups must be at least 1")
    ids = np.arange(n) % groups
    return ids[substream(seed, STREAM_SAMPLING).permutation(n)]


def fit_mom(
    data: Dataset,
    h: float,
    kernel: KernelSpec,
    M: float,
    groups: int,
    seed: int,
    x,
    partition: Optional[np.ndarray] = None,
) -> PointEstimate:
    """Median of per-group clipped kernel regressions at x.

    Groups whose window at x is empty are skipped; an even number of valid
    groups takes the mean of the two middle estimates.  All groups empty
    yields the degenerate estimate 0 with n_window = 0.
    """
    if partition is None:
        partition = mom_partition(data.n, groups, seed)
    idx, labels, weights = _window_data(data, kernel, h, x)
    if idx.size == 0:
        return PointEstimate(0.0, 0)
    group_ids = partition[idx]
    estimates = []
    for gid in range(groups):
        mask = group_ids == gid
        if not np.any(mask):
            continue
        w = weights[mask]
        estimates.append(_clip(float(np.dot(w, labels[mask]) / w.sum()), M))
    value = float(np.median(estimates))
    return PointEstimate(_clip(value, M), int(idx.size))


def fit_trimmed(
    data: Dataset,
    h: float,
    kernel: KernelSpec,
    M: float,
    trim_fraction: float,
    x,
) -> PointEstimate:
    """Symmetrically trimmed kernel regression at x.

    Drops the ceil(trim_fraction * n) largest- and smallest-label samples
    of the window (trimming counts samples, not kernel mass), then takes
    the clipped weighted average of the rest.  If trimming empties the
    window, falls back to the clipped in-window label median.
    """
    if not 0.0 <= trim_fraction < 0.5:
        raise ValueError("trim_fraction must lie in [0, 0.5)")
    idx, labels, weights = _window_data(data, kernel, h, x)
    if idx.size == 0:
        return PointEstimate(0.0, 0)
    n = idx.size
    k = math.ceil(trim_fraction * n)
    if 2 * k >= n:
        return PointEstimate(_clip(float(np.median(labels)), M), int(n))
    order = np.argsort(labels, kind="stable")
    keep = order[k : n - k] if k else order
    w = weights[keep]
    value = float(np.dot(w, labels[keep]) / w.sum())
    return PointEstimate(_clip(value, M), int(n))


def _batched(point_fn) -> Callable[[np.ndarray], np.ndarray]:
    def evaluate(xs):
        pts = np.atleast_2d(np.asarray(xs, dtype=float))
        return np.array([point_fn(x).value for x in pts])

    return evaluate


def huber_estimator(data, params, kernel=TRIANGULAR, tol=None):
    """Batch-evaluable Huber estimator: (n, d) points -> (n,) values."""
    return _batched(lambda x: fit_huber(data, params, kernel, x, tol))


def nw_estimator(data, h, M, kernel=TRIANGULAR):
    return _batched(lambda x: fit_nw(data, h, kernel, M, x))


def mom_estimator(data, h, M, groups, seed, kernel=TRIANGULAR):
    partition = mom_partition(data.n, groups, seed)
    return _batched(lambda x: fit_mom(data, h, kernel, M, groups, seed, x, partition))


def trimmed_estimator(data, h, M, trim_fraction, kernel=TRIANGULAR):
    return _batched(lambda x: fit_trimmed(data, h, kernel, M, trim_fraction, x))
