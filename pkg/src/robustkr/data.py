"""Datasets, ground-truth targets, synthetic generation and CSV ingestion.

Randomness convention: every seeded operation uses numpy's PCG64 generator,
keyed by ``SeedSequence([seed, stream])`` where ``stream`` is a fixed
per-purpose offset (sampling / noise / attack / split / eval).  Substreams
keep the modules from perturbing one another: the same seed always yields
the same covariates no matter what is done with the noise or attack
streams afterwards.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.spatial import cKDTree

__all__ = [
    "DataError",
    "Dataset",
    "TargetFunction",
    "NoiseSpec",
    "substream",
    "generate_synthetic",
    "load_csv",
    "save_dataset_csv",
    "read_dataset_csv",
    "split_train_test",
]

# Fixed substream offsets (see module docstring).
STREAM_SAMPLING = 0
STREAM_NOISE = 1
STREAM_ATTACK = 2
STREAM_SPLIT = 3
STREAM_EVAL = 4


class DataError(Exception):
    """Raised for malformed or unusable input data files."""


def substream(seed: int, stream: int) -> np.random.Generator:
    """PCG64 generator for the given (seed, purpose-stream) pair."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(stream)])))


@dataclass(frozen=True)
class Dataset:
    """Immutable training set: covariates in the unit cube plus real labels.

    Attacks and splits never mutate a Dataset; they build new ones.
    """

    points: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        lab = np.asarray(self.labels, dtype=float).ravel()
        if pts.shape[0] != lab.shape[0]:
            raise ValueError("points and labels must have equal length")
        if pts.shape[0] < 1:
            raise ValueError("dataset must contain at least one sample")
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(lab)):
            raise ValueError("dataset entries must be finite")
        if pts.min() < 0.0 or pts.max() > 1.0:
            raise ValueError("every coordinate must lie in [0, 1]")
        pts = pts.copy()
        lab = lab.copy()
        pts.flags.writeable = False
        lab.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", lab)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @cached_property
    def _tree(self) -> cKDTree:
        return cKDTree(self.points)

    def window(self, x, h: float) -> np.ndarray:
        """Indices of samples within distance h of x (closed ball), sorted."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = self._tree.query_ball_point(x, h)
        return np.sort(np.asarray(idx, dtype=int))

    def with_labels(self, labels) -> "Dataset":
        """New dataset sharing these covariates with replaced labels."""
        return Dataset(self.points, labels)


@dataclass(frozen=True)
class TargetFunction:
    """A ground-truth function evaluable on batches of points.

    ``dim`` is the required input dimension, or None when any dimension
    is accepted (constants).
    """

    name: str
    dim: Optional[int]
    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)

    def __call__(self, x) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        if self.dim is not None and pts.shape[1] != self.dim:
            raise ValueError(
                f"target '{self.name}' expects dimension {self.dim}, got {pts.shape[1]}"
            )
        return np.asarray(self.fn(pts), dtype=float).ravel()

    @staticmethod
    def sine_1d() -> "TargetFunction":
        """sin(2 pi x) on [0, 1]."""
        return TargetFunction("sine1d", 1, lambda p: np.sin(2.0 * np.pi * p[:, 0]))

    @staticmethod
    def sine_cosine_2d() -> "TargetFunction":
        """sin(2 pi x1) + cos(2 pi x2) on [0, 1]^2."""
        return TargetFunction(
            "sincos2d",
            2,
            lambda p: np.sin(2.0 * np.pi * p[:, 0]) + np.cos(2.0 * np.pi * p[:, 1]),
        )

    @staticmethod
    def constant(c: float) -> "TargetFunction":
        return TargetFunction(f"constant({c})", None, lambda p: np.full(p.shape[0], float(c)))

    @staticmethod
    def from_table(axes, values, name="table") -> "TargetFunction":
        """Tabulated target: multilinear interpolation of values on a grid.

        ``axes`` is a sequence of 1-D coordinate arrays, ``values`` the value
        array of shape (len(axes[0]), ...).
        """
        interp = RegularGridInterpolator(
            tuple(np.asarray(a, dtype=float) for a in axes),
            np.asarray(values, dtype=float),
            bounds_error=False,
            fill_value=None,
        )
        return TargetFunction(name, len(axes), lambda p: interp(p))

    @staticmethod
    def by_name(name: str) -> "TargetFunction":
        if name == "sine1d":
            return TargetFunction.sine_1d()
        if name == "sincos2d":
            return TargetFunction.sine_cosine_2d()
        if name.startswith("constant(") and name.endswith(")"):
            return TargetFunction.constant(float(name[len("constant(") : -1]))
        raise ValueError(f"unknown target function '{name}'")


@dataclass(frozen=True)
class NoiseSpec:
    """Additive label noise; only i.i.d. mean-zero Gaussian is supported."""

    sigma: float
    kind: str = "gaussian"

    def __post_init__(self):
        if self.kind != "gaussian":
            raise ValueError(f"unsupported noise kind '{self.kind}'")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.sigma == 0.0:
            return np.zeros(n)
        return rng.normal(0.0, self.sigma, size=n)


def generate_synthetic(
    n: int,
    dim: int,
    target: TargetFunction,
    noise: NoiseSpec,
    seed: int,
) -> Dataset:
    """Uniform covariates on [0,1]^dim with labels target(X) + noise.

    Bit-identical output for identical arguments and seed.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if target.dim is not None and target.dim != dim:
        raise ValueError(f"target '{target.name}' does not support dimension {dim}")
    pts = substream(seed, STREAM_SAMPLING).random((n, dim))
    labels = target(pts) + noise.sample(substream(seed, STREAM_NOISE), n)
    return Dataset(pts, labels)


def _minmax_scale(column: np.ndarray) -> np.ndarray:
    lo, hi = column.min(), column.max()
    if hi == lo:
        # Constant columns map to 0: keeps scaling total and deterministic.
        return np.zeros_like(column)
    return (column - lo) / (hi - lo)


def load_csv(path, target_column: str, sidecar_path=None) -> Dataset:
    """Read a headered CSV and min-max scale every column to [0, 1].

    All non-target columns become features.  When ``sidecar_path`` is given,
    the per-column (min, max) used for scaling is written there, one
    ``name,min,max`` line per column, enabling inverse transforms.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            rows = [row for row in reader if row]
    except OSError as exc:
        raise DataError(f"cannot read '{path}': {exc}") from exc
    if len(rows) < 2:
        raise DataError(f"'{path}' has no data rows")
    header = [name.strip() for name in rows[0]]
    if target_column not in header:
        raise DataError(f"target column '{target_column}' not found in {header}")
    try:
        table = np.array([[float(cell) for cell in row] for row in rows[1:]], dtype=float)
    except ValueError as exc:
        raise DataError(f"non-numeric cell in '{path}': {exc}") from exc
    if table.shape[1] != len(header):
        raise DataError(f"ragged rows in '{path}'")
    if not np.all(np.isfinite(table)):
        raise DataError(f"non-finite value in '{path}'")

    t_idx = header.index(target_column)
    feat_idx = [j for j in range(len(header)) if j != t_idx]
    if not feat_idx:
        raise DataError("file must contain at least one feature column")

    scaled = np.column_stack([_minmax_scale(table[:, j]) for j in range(len(header))])
    if sidecar_path is not None:
        with open(sidecar_path, "w", encoding="utf-8") as fh:
            fh.write("column,min,max\n")
            for j, name in enumerate(header):
                fh.write(f"{name},{table[:, j].min():.17g},{table[:, j].max():.17g}\n")
    return Dataset(scaled[:, feat_idx], scaled[:, t_idx])


def save_dataset_csv(dataset: Dataset, path) -> None:
    """Write a dataset as x1..xd,label rows (no rescaling)."""
    header = [f"x{k + 1}" for k in range(dataset.dim)] + ["label"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row, y in zip(dataset.points, dataset.labels):
            writer.writerow([f"{v:.17g}" for v in row] + [f"{y:.17g}"])


def read_dataset_csv(path) -> Dataset:
    """Read a file written by :func:`save_dataset_csv` without rescaling."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            rows = [row for row in reader if row]
    except OSError as exc:
        raise DataError(f"cannot read '{path}': {exc}") from exc
    if len(rows) < 2:
        raise DataError(f"'{path}' has no data rows")
    header = rows[0]
    if header[-1] != "label":
        raise DataError(f"'{path}' is not a dataset file (last column must be 'label')")
    try:
        table = np.array([[float(cell) for cell in row] for row in rows[1:]], dtype=float)
    except ValueError as exc:
        raise DataError(f"non-numeric cell in '{path}': {exc}") from exc
    try:
        return Dataset(table[:, :-1], table[:, -1])
    except ValueError as exc:
        raise DataError(f"'{path}': {exc}") from exc


def split_train_test(dataset: Dataset, train_fraction: float, seed: int):
    """Disjoint uniformly-random partition into (train, test).

    The train size is round-half-to-even of fraction * N, which is
    deterministic and unbiased over fractions.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    n = dataset.n
    n_train = int(round(train_fraction * n))
    if n_train == 0 or n_train == n:
        raise ValueError(f"split of {n} samples at fraction {train_fraction} leaves an empty side")
    perm = substream(seed, STREAM_SPLIT).permutation(n)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    train = Dataset(dataset.points[train_idx], dataset.labels[train_idx])
    test = Dataset(dataset.points[test_idx], dataset.labels[test_idx])
    return train, test
