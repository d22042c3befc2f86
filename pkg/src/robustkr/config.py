"""Experiment configuration: line-oriented "key = value" files with sections.

Unknown sections or keys are reported by name.  Flags override file values.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields, replace
from typing import Optional, Tuple

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "preset", "h_default"]

METHODS = ("nw", "mom", "trimmed", "huber", "corrected")
ATTACKS = ("random", "random_gaussian", "one_directional", "concentrated")


class ConfigError(Exception):
    """Raised for unusable experiment configurations."""


def h_default(n: int, dim: int, q: int) -> float:
    """Theorem-guided bandwidth max((q/N)^(1/(d+1)), N^(-1/(d+2))).

    A utility only; experiment bandwidths are always explicit inputs.
    """
    if n < 1 or dim < 1 or q < 0:
        raise ConfigError("h_default needs n >= 1, dim >= 1, q >= 0")
    return max((q / n) ** (1.0 / (dim + 1)), n ** (-1.0 / (dim + 2)))


@dataclass(frozen=True)
class ExperimentConfig:
    # data
    kind: str = "synthetic"  # "synthetic" or "csv"
    n: int = 10000
    dim: int = 1
    target: str = "sine1d"
    sigma: float = 1.0
    csv_path: str = ""
    target_column: str = ""
    # estimator parameters
    h: float = 0.03
    T: float = 1.0
    M: float = 3.0
    groups: int = 20
    trim_fraction: float = 0.2
    lipschitz: float = 2.0 * math.pi
    grid_counts: Tuple[int, ...] = (50,)
    proj_tol: float = 1e-9
    max_sweeps: int = 1000
    # sweep
    methods: Tuple[str, ...] = METHODS
    attacks: Tuple[str, ...] = ("random", "one_directional", "concentrated")
    q_schedule: Tuple[int, ...] = tuple(500 * k for k in range(11))
    repeats: int = 50
    seed: int = 0
    n_eval: int = 300
    linf_resolution: int = 2001
    attack_value: float = 10.0
    attack_sigma: float = 10.0
    # real data
    train_fraction: float = 0.9
    q_fraction: float = 0.1
    split_seeds: int = 10
    # output
    output_dir: str = ""
    workers: int = 1

    def validate(self) -> "ExperimentConfig":
        if self.kind not in ("synthetic", "csv"):
            raise ConfigError(f"unknown dataset kind '{self.kind}'")
        if self.kind == "csv" and not self.csv_path:
            raise ConfigError("csv datasets need csv_path")
        if self.kind == "synthetic" and self.n < 1:
            raise ConfigError("n must be at least 1")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method '{m}' (choose from {METHODS})")
        for a in self.attacks:
            if a not in ATTACKS:
                raise ConfigError(f"unknown attack '{a}' (choose from {ATTACKS})")
        if not self.methods:
            raise ConfigError("method list is empty")
        if any(q < 0 or q > self.n for q in self.q_schedule) and self.kind == "synthetic":
            raise ConfigError(f"q schedule {self.q_schedule} must lie within [0, N={self.n}]")
        if self.repeats < 1:
            raise ConfigError("repeats must be at least 1")
        if self.h <= 0 or self.T <= 0 or self.M <= 0 or self.lipschitz <= 0:
            raise ConfigError("h, T, M and lipschitz must be positive")
        if not 0 <= self.trim_fraction < 0.5:
            raise ConfigError("trim_fraction must lie in [0, 0.5)")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction must lie strictly between 0 and 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        return self


_SECTIONS = {
    "data": {
        "kind": str,
        "n": int,
        "dim": int,
        "target": str,
        "sigma": float,
        "csv_path": str,
        "target_column": str,
    },
    "estimator": {
        "h": float,
        "t": float,
        "m": float,
        "groups": int,
        "trim_fraction": float,
        "lipschitz": float,
        "grid": "counts",
        "proj_tol": float,
        "max_sweeps": int,
    },
    "sweep": {
        "methods": "list",
        "attacks": "list",
        "q": "schedule",
        "repeats": int,
        "seed": int,
        "n_eval": int,
        "linf_resolution": int,
        "attack_value": float,
        "attack_sigma": float,
    },
    "realdata": {
        "train_fraction": float,
        "q_fraction": float,
        "split_seeds": int,
    },
    "output": {
        "dir": str,
        "workers": int,
    },
}

_KEY_TO_FIELD = {
    ("estimator", "t"): "T",
    ("estimator", "m"): "M",
    ("estimator", "grid"): "grid_counts",
    ("sweep", "q"): "q_schedule",
    ("output", "dir"): "output_dir",
}


def _parse_schedule(text: str) -> Tuple[int, ...]:
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"schedule '{text}' must be start:stop:step or a comma list")
        start, stop, step = (int(p) for p in parts)
        if step <= 0:
            raise ConfigError(f"schedule step must be positive in '{text}'")
        return tuple(range(start, stop + 1, step))
    return tuple(int(v) for v in text.split(",") if v.strip())


def _parse_counts(text: str) -> Tuple[int, ...]:
    sep = "x" if "x" in text else ","
    return tuple(int(v) for v in text.split(sep) if v.strip())


def parse_config(path) -> ExperimentConfig:
    """Read a sectioned key = value file into an ExperimentConfig."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file '{path}'")
    values = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section '[{section}]'")
        known = _SECTIONS[section]
        for key, raw in parser.items(section):
            if key not in known:
                raise ConfigError(f"unknown key '{key}' in section '[{section}]'")
            kind = known[key]
            field_name = _KEY_TO_FIELD.get((section, key), key)
            try:
                if kind == "list":
                    values[field_name] = tuple(v.strip() for v in raw.split(",") if v.strip())
                elif kind == "schedule":
                    values[field_name] = _parse_schedule(raw)
                elif kind == "counts":
                    values[field_name] = _parse_counts(raw)
                else:
                    values[field_name] = kind(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for '{key}' in '[{section}]': {exc}") from exc
    return ExperimentConfig(**values).validate()


def preset(name: str) -> ExperimentConfig:
    """Named experiment presets.

    ``fig1``: the spike-illustration setting (h = 0.05, concentrated attack).
    ``fig2``: the 1-D error-versus-budget sweep (h = 0.03, all methods).
    ``fig2-2d``: the 2-D sweep variant (h = 0.1, 20 x 20 grid).
    """
    if name == "fig1":
        return ExperimentConfig(
            h=0.05,
            methods=("nw", "huber", "corrected"),
            attacks=("concentrated",),
            q_schedule=(500, 2000),
            repeats=20,
        )
    if name == "fig2":
        return ExperimentConfig()
    if name == "fig2-2d":
        return ExperimentConfig(
            dim=2,
            target="sincos2d",
            h=0.1,
            grid_counts=(20, 20),
            linf_resolution=201,
        )
    raise ConfigError(f"unknown preset '{name}'")
