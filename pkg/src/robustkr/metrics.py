"""Risk evaluation and empirical convergence-rate fitting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .data import TargetFunction, substream, STREAM_EVAL

__all__ = ["RiskReport", "eval_l2", "eval_linf", "fit_rate", "risk_report"]


@dataclass(frozen=True)
class RiskReport:
    """RMSE and sup-norm error of an estimate over one evaluation point set."""

    rmse: float
    linf: float
    n_eval: int
    eval_mode: str  # "monte_carlo" or "dense_grid"

    def __post_init__(self):
        if not (np.isfinite(self.rmse) and np.isfinite(self.linf)):
            raise ValueError("risk values must be finite")
        if self.rmse < 0 or self.linf < 0:
            raise ValueError("risk values must be nonnegative")
        if self.rmse > self.linf * (1.0 + 1e-12) + 1e-12:
            raise ValueError("rmse cannot exceed linf on the same point set")
        if self.eval_mode not in ("monte_carlo", "dense_grid"):
            raise ValueError(f"unknown eval_mode '{self.eval_mode}'")


def _resolve_dim(truth: TargetFunction, dim: Optional[int]) -> int:
    if dim is not None:
        return int(dim)
    if truth.dim is not None:
        return truth.dim
    raise ValueError("evaluation dimension is ambiguous; pass dim explicitly")


def _errors_at(estimator: Callable, truth: TargetFunction, pts: np.ndarray) -> np.ndarray:
    return np.asarray(estimator(pts), dtype=float).ravel() - truth(pts)


def eval_l2(
    estimator: Callable,
    truth: TargetFunction,
    n_eval: int,
    seed: int,
    dim: Optional[int] = None,
) -> float:
    """Monte-Carlo RMSE over fresh uniform test points on [0, 1]^d."""
    if n_eval < 1:
        raise ValueError("n_eval must be at least 1")
    d = _resolve_dim(truth, dim)
    pts = substream(seed, STREAM_EVAL).random((n_eval, d))
    err = _errors_at(estimator, truth, pts)
    return float(np.sqrt(np.mean(err**2)))


def _dense_grid(dim: int, resolution: int) -> np.ndarray:
    axes = [np.linspace(0.0, 1.0, resolution)] * dim
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def eval_linf(
    estimator: Callable,
    truth: TargetFunction,
    grid_resolution: int,
    dim: Optional[int] = None,
) -> float:
    """Max absolute error over a regular grid covering [0, 1]^d."""
    if grid_resolution < 2:
        raise ValueError("grid_resolution must be at least 2 per axis")
    d = _resolve_dim(truth, dim)
    pts = _dense_grid(d, grid_resolution)
    err = _errors_at(estimator, truth, pts)
    return float(np.max(np.abs(err)))


def risk_report(
    estimator: Callable,
    truth: TargetFunction,
    mode: str,
    n_eval: int = 1000,
    seed: int = 0,
    grid_resolution: int = 2001,
    dim: Optional[int] = None,
) -> RiskReport:
    """Joint (rmse, linf) over a single point set, Monte-Carlo or dense-grid."""
    d = _resolve_dim(truth, dim)
    if mode == "monte_carlo":
        pts = substream(seed, STREAM_EVAL).random((n_eval, d))
    elif mode == "dense_grid":
        pts = _dense_grid(d, grid_resolution)
    else:
        raise ValueError(f"unknown eval mode '{mode}'")
    err = _errors_at(estimator, truth, pts)
    return RiskReport(
        rmse=float(np.sqrt(np.mean(err**2))),
        linf=float(np.max(np.abs(err))),
        n_eval=pts.shape[0],
        eval_mode=mode,
    )


def fit_rate(points) -> float:
    """Least-squares slope of log(error) against log(N).

    ``points`` is a sequence of (N, error) pairs, at least three, all
    entries positive.
    """
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 3:
        raise ValueError("need at least three (N, error) pairs")
    if np.any(arr <= 0):
        raise ValueError("all sizes and errors must be positive")
    slope, _ = np.polyfit(np.log(arr[:, 0]), np.log(arr[:, 1]), deg=1)
    return float(slope)
