"""Reproducible experiment orchestration: q-sweeps and the real-data pipeline.

Every sweep cell (method, attack, q, repeat) regenerates its own data from a
seed derived by a stable hash, so any cell can be re-run in isolation and
reproduce its row from the full sweep byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .attacks import ValueRule, attack_concentrated, attack_one_directional, attack_random
from .config import ConfigError, ExperimentConfig
from .data import Dataset, NoiseSpec, TargetFunction, generate_synthetic, load_csv, split_train_test
from .estimators import (
    HuberParams,
    huber_estimator,
    mom_estimator,
    nw_estimator,
    trimmed_estimator,
)
from .kernels import TRIANGULAR
from .metrics import eval_l2, eval_linf
from .projection import Grid, ProjectionParams, corrected_estimator, project_scattered

__all__ = [
    "derive_seed",
    "CellResult",
    "run_cell",
    "run_sweep",
    "aggregate",
    "write_rows",
    "emit_plotdata",
    "run_realdata",
    "SWEEP_COLUMNS",
]

SWEEP_COLUMNS = ("method", "attack", "q", "N", "h", "T", "M", "seed", "rmse", "linf")
AGG_COLUMNS = ("method", "attack", "q", "N", "h", "T", "M", "repeats", "rmse", "linf")


def derive_seed(base_seed: int, method: str, attack: str, q: int, repeat: int) -> int:
    """Stable 64-bit seed for one sweep cell.

    SHA-256 of the string "base|method|attack|q|repeat", first eight bytes
    big-endian.  No two cells share a seed.
    """
    key = f"{base_seed}|{method}|{attack}|{q}|{repeat}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


@dataclass(frozen=True)
class CellResult:
    row: Dict[str, object]
    converged: bool


def _apply_attack(data: Dataset, attack: str, q: int, seed: int, config: ExperimentConfig) -> Dataset:
    if attack == "random":
        return attack_random(data, q, ValueRule.plus_minus(config.attack_value), seed).dataset
    if attack == "random_gaussian":
        return attack_random(data, q, ValueRule.gaussian(0.0, config.attack_sigma), seed).dataset
    if attack == "one_directional":
        return attack_one_directional(data, q, config.attack_value, seed).dataset
    if attack == "concentrated":
        return attack_concentrated(data, q, config.attack_value, seed).dataset
    raise ConfigError(f"unknown attack '{attack}'")


def _sweep_grid(config: ExperimentConfig) -> Grid:
    counts = config.grid_counts
    if len(counts) != config.dim:
        counts = (50,) if config.dim == 1 else (20,) * config.dim
    spacing = 1.0 / (max(counts) - 1) if max(counts) > 1 else 1.0
    return Grid(origin=(0.0,) * config.dim, spacing=spacing, counts=counts)


def _make_estimator(method: str, data: Dataset, seed: int, config: ExperimentConfig):
    """Returns (callable estimator, converged flag)."""
    params = HuberParams(config.h, config.T, config.M)
    if method == "nw":
        return nw_estimator(data, config.h, config.M), True
    if method == "mom":
        return mom_estimator(data, config.h, config.M, config.groups, seed), True
    if method == "trimmed":
        return trimmed_estimator(data, config.h, config.M, config.trim_fraction), True
    if method == "huber":
        return huber_estimator(data, params), True
    if method == "corrected":
        est = corrected_estimator(
            data,
            params,
            TRIANGULAR,
            _sweep_grid(config),
            ProjectionParams(config.lipschitz, config.proj_tol, config.max_sweeps),
        )
        return est, est.info.converged
    raise ConfigError(f"unknown method '{method}'")


def run_cell(config: ExperimentConfig, method: str, attack: str, q: int, repeat: int) -> CellResult:
    """One sweep cell: regenerate, attack, fit, evaluate."""
    seed = derive_seed(config.seed, method, attack, q, repeat)
    truth = TargetFunction.by_name(config.target)
    data = generate_synthetic(config.n, config.dim, truth, NoiseSpec(config.sigma), seed)
    attacked = _apply_attack(data, attack, q, seed, config)
    estimator, converged = _make_estimator(method, attacked, seed, config)
    rmse = eval_l2(estimator, truth, config.n_eval, seed, dim=config.dim)
    linf = eval_linf(estimator, truth, config.linf_resolution, dim=config.dim)
    row = {
        "method": method,
        "attack": attack,
        "q": q,
        "N": config.n,
        "h": config.h,
        "T": config.T,
        "M": config.M,
        "seed": seed,
        "rmse": rmse,
        "linf": linf,
    }
    return CellResult(row, converged)


def _cell_args(config: ExperimentConfig):
    for method in config.methods:
        for attack in config.attacks:
            for q in config.q_schedule:
                for repeat in range(config.repeats):
                    yield (config, method, attack, q, repeat)


def run_sweep(config: ExperimentConfig) -> List[CellResult]:
    """All cells of the configured sweep, in deterministic row order."""
    config.validate()
    args = list(_cell_args(config))
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_cell_star, args, chunksize=8))
    else:
        results = [run_cell(*a) for a in args]
    return results


def _run_cell_star(args):
    return run_cell(*args)


def aggregate(results: Sequence[CellResult]) -> List[Dict[str, object]]:
    """Mean rows per (method, attack, q), plus worst-case-over-attacks rows.

    The configured-attack maximum is the operational surrogate for the
    adversarial supremum and is labeled attack="worst_case".
    """
    groups: Dict[tuple, List[Dict[str, object]]] = {}
    for res in results:
        key = (res.row["method"], res.row["attack"], res.row["q"])
        groups.setdefault(key, []).append(res.row)
    agg_rows = []
    for (method, attack, q), rows in sorted(groups.items()):
        first = rows[0]
        agg_rows.append(
            {
                "method": method,
                "attack": attack,
                "q": q,
                "N": first["N"],
                "h": first["h"],
                "T": first["T"],
                "M": first["M"],
                "repeats": len(rows),
                "rmse": float(np.mean([r["rmse"] for r in rows])),
                "linf": float(np.mean([r["linf"] for r in rows])),
            }
        )
    worst: Dict[tuple, Dict[str, object]] = {}
    for row in agg_rows:
        key = (row["method"], row["q"])
        cur = worst.get(key)
        if cur is None:
            worst[key] = dict(row, attack="worst_case")
        else:
            cur["rmse"] = max(cur["rmse"], row["rmse"])
            cur["linf"] = max(cur["linf"], row["linf"])
    return agg_rows + [worst[k] for k in sorted(worst)]


def _format_value(v) -> str:
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def write_rows(rows: Sequence[Dict[str, object]], columns: Sequence[str], path) -> None:
    """Rows sorted by their column-key tuple, so output is order-independent."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    formatted = sorted(
        [tuple(_format_value(row[c]) for c in columns) for row in rows]
    )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        writer.writerows(formatted)


def format_row(row: Dict[str, object], columns: Sequence[str] = SWEEP_COLUMNS) -> str:
    return ",".join(_format_value(row[c]) for c in columns)


def emit_plotdata(agg_rows: Sequence[Dict[str, object]], outdir) -> List[Path]:
    """One CSV per (metric, attack): columns q, then one column per method.

    Values are taken from the aggregated rows, never recomputed.
    """
    if not agg_rows:
        raise ValueError("aggregated table is empty")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    methods = sorted({r["method"] for r in agg_rows})
    attacks = sorted({r["attack"] for r in agg_rows})
    qs = sorted({r["q"] for r in agg_rows})
    lookup = {(r["method"], r["attack"], r["q"]): r for r in agg_rows}
    written = []
    for metric in ("rmse", "linf"):
        for attack in attacks:
            path = outdir / f"{metric}_{attack}.csv"
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["q"] + methods)
                for q in qs:
                    row = [str(q)]
                    for m in methods:
                        entry = lookup.get((m, attack, q))
                        row.append(_format_value(entry[metric]) if entry else "")
                    writer.writerow(row)
            written.append(path)
    return written


# ---------------------------------------------------------------------------
# Real data


def _scattered_corrected(train, test_points, config: ExperimentConfig):
    """Corrected estimates at scattered evaluation sites (any dimension):
    Huber-fit at the sites, then L1 projection under pairwise Lipschitz
    constraints of the Euclidean metric."""
    params = HuberParams(config.h, config.T, config.M)
    initial = huber_estimator(train, params)(test_points)
    values, info = project_scattered(
        test_points, initial, config.lipschitz, config.proj_tol, config.max_sweeps
    )
    return values, info.converged


def run_realdata(config: ExperimentConfig) -> Tuple[List[Dict[str, object]], bool]:
    """Scale, split, attack the training side, fit all methods, score on the
    clean test side.  Returns (rows, all_converged).

    All methods see the same attacked training set within one
    (attack, split-seed) pair, so rows are directly comparable.
    """
    config.validate()
    if config.kind != "csv":
        raise ConfigError("run_realdata needs a csv dataset")
    full = load_csv(config.csv_path, config.target_column)
    rows: List[Dict[str, object]] = []
    all_converged = True
    attacks = config.attacks if config.attacks else ("random_gaussian", "concentrated")
    for rep in range(config.split_seeds):
        split_seed = derive_seed(config.seed, "realdata-split", "-", 0, rep)
        train, test = split_train_test(full, config.train_fraction, split_seed)
        q = math.floor(config.q_fraction * train.n)
        clean_nw = nw_estimator(train, config.h, config.M)
        clean_rmse = float(np.sqrt(np.mean((clean_nw(test.points) - test.labels) ** 2)))
        for attack in attacks:
            attack_seed = derive_seed(config.seed, "realdata-attack", attack, q, rep)
            attacked = _apply_attack(train, attack, q, attack_seed, config)
            rows.append(
                {
                    "attack": attack,
                    "method": "clean",
                    "split_seed": rep,
                    "q": q,
                    "n_train": train.n,
                    "n_test": test.n,
                    "rmse": clean_rmse,
                }
            )
            for method in config.methods:
                if method == "corrected":
                    values, converged = _scattered_corrected(attacked, test.points, config)
                    all_converged = all_converged and converged
                    preds = values
                else:
                    estimator, converged = _make_estimator(method, attacked, attack_seed, config)
                    all_converged = all_converged and converged
                    preds = estimator(test.points)
                rmse = float(np.sqrt(np.mean((preds - test.labels) ** 2)))
                rows.append(
                    {
                        "attack": attack,
                        "method": method,
                        "split_seed": rep,
                        "q": q,
                        "n_train": train.n,
                        "n_test": test.n,
                        "rmse": rmse,
                    }
                )
    return rows, all_converged


REALDATA_COLUMNS = ("attack", "method", "split_seed", "q", "n_train", "n_test", "rmse")


def realdata_table(rows: Sequence[Dict[str, object]]) -> List[Dict[str, object]]:
    """Median test RMSE per (attack, method) across split seeds."""
    groups: Dict[tuple, List[float]] = {}
    for row in rows:
        groups.setdefault((row["attack"], row["method"]), []).append(row["rmse"])
    return [
        {"attack": attack, "method": method, "rmse_median": float(np.median(vals)),
         "rmse_mean": float(np.mean(vals)), "splits": len(vals)}
        for (attack, method), vals in sorted(groups.items())
    ]
