"""Label-poisoning attack simulators.

Each attack takes a dataset and a budget q, picks at most q indices, and
returns a new dataset whose labels differ from the input only at those
indices.  Covariates are never modified.  Identical (data, parameters,
seed) yield identical results.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import norm

from .data import Dataset, TargetFunction, substream, STREAM_ATTACK

__all__ = [
    "ValueRule",
    "AttackResult",
    "attack_random",
    "attack_one_directional",
    "attack_concentrated",
    "attack_tv_mixture",
    "gaussian_tv",
    "write_indices_csv",
    "read_indices_csv",
]


@dataclass(frozen=True)
class ValueRule:
    """How attacked labels are filled in a random attack."""

    kind: str  # "pm", "gaussian" or "constant"
    a: float
    b: float = 0.0

    @staticmethod
    def plus_minus(v: float) -> "ValueRule":
        """+v or -v with equal probability."""
        return ValueRule("pm", float(v))

    @staticmethod
    def gaussian(mu: float, sigma: float) -> "ValueRule":
        return ValueRule("gaussian", float(mu), float(sigma))

    @staticmethod
    def constant(v: float) -> "ValueRule":
        return ValueRule("constant", float(v))

    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        if self.kind == "pm":
            return self.a * rng.choice([-1.0, 1.0], size=k)
        if self.kind == "gaussian":
            return rng.normal(self.a, self.b, size=k)
        if self.kind == "constant":
            return np.full(k, self.a)
        raise ValueError(f"unknown value rule '{self.kind}'")


@dataclass(frozen=True)
class AttackResult:
    """Attacked dataset plus the sorted index set of modified labels.

    ``overlap`` counts samples that were nearest to both centers of a
    concentrated attack (attacked once, by the first center's rule).
    """

    dataset: Dataset
    attacked_indices: np.ndarray
    overlap: int = 0

    def __post_init__(self):
        idx = np.sort(np.asarray(self.attacked_indices, dtype=int))
        idx.flags.writeable = False
        object.__setattr__(self, "attacked_indices", idx)


def _check_budget(data: Dataset, q: int) -> None:
    if q < 0 or q > data.n:
        raise ValueError(f"budget q={q} must lie in [0, N={data.n}]")


def attack_random(data: Dataset, q: int, value_rule: ValueRule, seed: int) -> AttackResult:
    """Replace the labels of q uniformly chosen samples per the value rule."""
    _check_budget(data, q)
    rng = substream(seed, STREAM_ATTACK)
    idx = np.sort(rng.choice(data.n, size=q, replace=False))
    labels = data.labels.copy()
    labels[idx] = value_rule.sample(rng, q)
    return AttackResult(data.with_labels(labels), idx)


def attack_one_directional(data: Dataset, q: int, value: float, seed: int) -> AttackResult:
    """Set the labels of q uniformly chosen samples to a single value."""
    _check_budget(data, q)
    rng = substream(seed, STREAM_ATTACK)
    idx = np.sort(rng.choice(data.n, size=q, replace=False))
    labels = data.labels.copy()
    labels[idx] = float(value)
    return AttackResult(data.with_labels(labels), idx)


def attack_concentrated(data: Dataset, q: int, value: float, seed: int) -> AttackResult:
    """Two uniform centers; the floor(q/2) nearest samples to the first get
    +value, the floor(q/2) nearest to the second get -value.

    Euclidean distances, exact ties broken by index.  A sample among the
    nearest of both centers is attacked once, by the first center's rule;
    the overlap count is reported on the result.
    """
    _check_budget(data, q)
    rng = substream(seed, STREAM_ATTACK)
    c1 = rng.random(data.dim)
    c2 = rng.random(data.dim)
    k = q // 2
    labels = data.labels.copy()
    if k == 0:
        return AttackResult(data.with_labels(labels), np.empty(0, dtype=int))
    dist1 = np.linalg.norm(data.points - c1, axis=1)
    dist2 = np.linalg.norm(data.points - c2, axis=1)
    set1 = np.argsort(dist1, kind="stable")[:k]
    set2 = np.argsort(dist2, kind="stable")[:k]
    labels[set1] = float(value)
    in_set1 = np.zeros(data.n, dtype=bool)
    in_set1[set1] = True
    set2_only = set2[~in_set1[set2]]
    labels[set2_only] = -float(value)
    overlap = k - set2_only.size
    attacked = np.union1d(set1, set2)
    return AttackResult(data.with_labels(labels), attacked, overlap=overlap)


def gaussian_tv(mu1: float, mu2: float, sigma: float) -> float:
    """Exact total variation distance between N(mu1, sigma^2) and N(mu2, sigma^2)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return float(2.0 * norm.cdf(abs(mu1 - mu2) / (2.0 * sigma)) - 1.0)


def _sample_positive_part(rng, mu_sub, mu_env, sigma):
    """Draw from the density proportional to (p_env - p_sub)+, where p_env and
    p_sub are the N(mu_env, sigma^2) and N(mu_sub, sigma^2) densities.

    Rejection sampling with p_env as the envelope: a proposal z ~ p_env is
    accepted with probability (1 - p_sub(z)/p_env(z))+, so the per-proposal
    acceptance rate equals the total variation distance.
    """
    mu_sub = np.asarray(mu_sub, dtype=float)
    mu_env = np.asarray(mu_env, dtype=float)
    out = np.empty(mu_sub.size)
    pending = np.arange(mu_sub.size)
    while pending.size:
        z = rng.normal(mu_env[pending], sigma)
        log_ratio = ((z - mu_env[pending]) ** 2 - (z - mu_sub[pending]) ** 2) / (2.0 * sigma**2)
        accept = rng.random(pending.size) < 1.0 - np.exp(np.minimum(log_ratio, 50.0))
        out[pending[accept]] = z[accept]
        pending = pending[~accept]
    return out


def attack_tv_mixture(
    data: Dataset,
    q: int,
    eta1: TargetFunction,
    eta2: TargetFunction,
    sigma: float,
    radius: float,
    which_truth: int,
    seed: int,
) -> AttackResult:
    """Mixture attack that makes eta1 and eta2 indistinguishable inside a ball.

    For every sample with ||X_i|| <= radius, the attack coin lands heads with
    probability alpha_i = TV_i / (1 + TV_i), where TV_i is the exact total
    variation distance between N(eta1(X_i), sigma^2) and N(eta2(X_i), sigma^2).
    Heads samples (subsampled to q if over budget) get labels drawn from the
    normalized positive part (p2 - p1)+ when the data were generated under
    eta1, and from (p1 - p2)+ under eta2.  After the attack the conditional
    label law inside the ball is the same mixture under either truth.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if which_truth not in (1, 2):
        raise ValueError("which_truth must be 1 or 2")
    _check_budget(data, q)
    rng = substream(seed, STREAM_ATTACK)

    norms = np.linalg.norm(data.points, axis=1)
    in_ball = norms <= radius
    mu1 = eta1(data.points)
    mu2 = eta2(data.points)
    tv = np.zeros(data.n)
    if np.any(in_ball):
        tv[in_ball] = 2.0 * norm.cdf(np.abs(mu1[in_ball] - mu2[in_ball]) / (2.0 * sigma)) - 1.0
    alpha = tv / (1.0 + tv)
    coins = rng.random(data.n) < alpha
    candidates = np.flatnonzero(coins)
    if candidates.size > q:
        candidates = np.sort(rng.choice(candidates, size=q, replace=False))

    labels = data.labels.copy()
    if candidates.size:
        if which_truth == 1:
            new = _sample_positive_part(rng, mu1[candidates], mu2[candidates], sigma)
        else:
            new = _sample_positive_part(rng, mu2[candidates], mu1[candidates], sigma)
        labels[candidates] = new
    return AttackResult(data.with_labels(labels), candidates)


def write_indices_csv(result: AttackResult, path) -> None:
    """Serialize the attacked index set as a one-column CSV."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("index\n")
        for i in result.attacked_indices:
            fh.write(f"{int(i)}\n")


def read_indices_csv(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "index":
            raise ValueError(f"unexpected indices CSV header '{header}'")
        return np.array([int(line) for line in fh if line.strip()], dtype=int)
