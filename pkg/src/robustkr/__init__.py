"""Poisoning-robust nonparametric regression.

A Huber-loss kernel M-estimator with a Lipschitz L1-projection correction,
baseline estimators (clipped Nadaraya-Watson, median-of-means, trimmed
mean), label-poisoning attack simulators, risk metrics, and a reproducible
experiment harness.
"""

from .data import (
    DataError,
    Dataset,
    NoiseSpec,
    TargetFunction,
    generate_synthetic,
    load_csv,
    read_dataset_csv,
    save_dataset_csv,
    split_train_test,
    substream,
)
from .kernels import TRIANGULAR, UNIFORM, KernelSpec, custom_kernel, kernel_weight, kernel_weights
from .estimators import (
    HuberParams,
    PointEstimate,
    fit_huber,
    fit_mom,
    fit_nw,
    fit_trimmed,
    huber_argmin,
    huber_estimator,
    huber_grad,
    huber_loss,
    mom_estimator,
    mom_partition,
    nw_estimator,
    trimmed_estimator,
)
from .projection import (
    CorrectedEstimator,
    Grid,
    GridFunction,
    ProjectionInfo,
    ProjectionParams,
    corrected_estimator,
    default_grid,
    interpolate,
    max_violation,
    project_lipschitz,
    project_lipschitz_lp,
    project_scattered,
    read_grid_csv,
    sample_to_grid,
    write_grid_csv,
)
from .attacks import (
    AttackResult,
    ValueRule,
    attack_concentrated,
    attack_one_directional,
    attack_random,
    attack_tv_mixture,
    gaussian_tv,
    read_indices_csv,
    write_indices_csv,
)
from .metrics import RiskReport, eval_l2, eval_linf, fit_rate, risk_report

__version__ = "0.1.0"
