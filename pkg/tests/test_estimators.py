import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robustkr import (
    Dataset,
    HuberParams,
    NoiseSpec,
    TargetFunction,
    TRIANGULAR,
    UNIFORM,
    fit_huber,
    fit_mom,
    fit_nw,
    fit_trimmed,
    generate_synthetic,
    huber_argmin,
    huber_grad,
    huber_loss,
    mom_partition,
)
from huber_oracle import grid_scan_min, grid_scan_min_naive, huber_objective

PARAMS = HuberParams(h=0.1, T=1.0, M=3.0)


def _dataset_1d(positions, labels):
    return Dataset(np.asarray(positions, dtype=float)[:, None], labels)


# --- Huber loss and derivative -------------------------------------------


def test_huber_loss_values():
    assert huber_loss(0.0, 1.0) == 0.0
    assert huber_loss(1.0, 1.0) == pytest.approx(1.0)   # boundary: u^2 = T^2
    assert huber_loss(2.0, 1.0) == pytest.approx(3.0)   # 2T|u| - T^2 = 4 - 1


def test_huber_grad_values():
    assert huber_grad(0.0, 1.0) == 0.0
    assert huber_grad(1.0, 1.0) == pytest.approx(2.0)   # continuous at the knee
    assert huber_grad(-5.0, 1.0) == pytest.approx(-2.0)


@given(u=st.floats(-50, 50), t=st.floats(0.1, 5.0))
@settings(max_examples=200, deadline=None)
def test_huber_loss_properties(u, t):
    assert huber_loss(u, t) == pytest.approx(huber_loss(-u, t), rel=1e-12)  # even
    assert huber_grad(u, t) == pytest.approx(-huber_grad(-u, t), abs=1e-12)  # odd
    assert abs(huber_grad(u, t)) <= 2 * t + 1e-12
    # midpoint convexity
    assert huber_loss(u / 2, t) <= 0.5 * huber_loss(u, t) + 0.5 * huber_loss(0.0, t) + 1e-12


def test_huber_continuity_at_knee():
    for t in (0.5, 1.0, 2.0):
        eps = 1e-9
        assert huber_loss(t - eps, t) == pytest.approx(huber_loss(t + eps, t), abs=1e-6)


# --- fit_huber -------------------------------------------------------------


def test_fit_huber_common_value():
    data = _dataset_1d([0.5, 0.51, 0.49, 0.52], [2.0, 2.0, 2.0, 2.0])
    est = fit_huber(data, PARAMS, TRIANGULAR, [0.5])
    assert est.value == pytest.approx(2.0, abs=1e-5)
    assert est.n_window == 4


def test_fit_huber_clips_to_m():
    data = _dataset_1d([0.5, 0.51, 0.49], [10.0, 10.0, 10.0])
    est = fit_huber(data, PARAMS, TRIANGULAR, [0.5])
    assert est.value == 3.0


def test_fit_huber_empty_window():
    data = _dataset_1d([0.9], [1.0])
    est = fit_huber(data, PARAMS, TRIANGULAR, [0.1])
    assert est == type(est)(0.0, 0)


def test_fit_huber_matches_grid_scan_on_random_windows():
    # spec example: random 50-sample window, objective within 2e-4 of a
    # dense scan at resolution 1e-4
    rng = np.random.default_rng(0)
    for _ in range(25):
        n = 50
        y = rng.uniform(-10, 10, n)
        w = rng.uniform(1.0, 2.0, n)
        s_hat = huber_argmin(y, w, 1.0, 3.0, tol=3e-6)
        obj = huber_objective(s_hat, y, w, 1.0)[0]
        scan = grid_scan_min(y, w, 1.0, 3.0, 1e-4)
        assert obj <= scan + 2e-4


def test_fast_oracle_agrees_with_naive_scan():
    rng = np.random.default_rng(7)
    for _ in range(20):
        n = int(rng.integers(1, 120))
        y = rng.uniform(-10, 10, n)
        w = rng.uniform(1.0, 2.0, n)
        t = float(rng.choice([0.5, 1.0, 2.0]))
        assert grid_scan_min(y, w, t, 3.0, 2e-3) == pytest.approx(
            grid_scan_min_naive(y, w, t, 3.0, 2e-3), abs=1e-9
        )


def test_huber_argmin_boundary_rules():
    # subgradient positive on the whole bracket: stay at -M
    assert huber_argmin(np.array([-10.0]), np.array([1.0]), 1.0, 3.0, 1e-8) == -3.0
    assert huber_argmin(np.array([10.0]), np.array([1.0]), 1.0, 3.0, 1e-8) == 3.0


# --- fit_nw ----------------------------------------------------------------


def test_fit_nw_single_sample():
    data = _dataset_1d([0.5], [1.7])
    assert fit_nw(data, 0.1, TRIANGULAR, 3.0, [0.52]).value == pytest.approx(1.7)


def test_fit_nw_equal_weights_mean():
    data = _dataset_1d([0.49, 0.51], [0.0, 2.0])
    assert fit_nw(data, 0.1, TRIANGULAR, 3.0, [0.5]).value == pytest.approx(1.0)


def test_fit_nw_clipping():
    data = _dataset_1d([0.5, 0.55], [10.0, 10.0])
    assert fit_nw(data, 0.1, TRIANGULAR, 3.0, [0.5]).value == 3.0


# --- fit_mom ---------------------------------------------------------------


def test_fit_mom_single_group_equals_nw():
    data = generate_synthetic(200, 1, TargetFunction.sine_1d(), NoiseSpec(0.5), seed=1)
    for x in ([0.3], [0.7]):
        mom = fit_mom(data, 0.1, TRIANGULAR, 3.0, 1, 0, x)
        nw = fit_nw(data, 0.1, TRIANGULAR, 3.0, x)
        assert mom.value == pytest.approx(nw.value, abs=1e-12)


def test_fit_mom_median_of_group_estimates():
    # three groups whose in-window members have labels -1, 0, 5
    positions = [0.5, 0.5, 0.5]
    labels = [-1.0, 0.0, 5.0]
    data = _dataset_1d(positions, labels)
    # group ids are a seeded permutation; with three singleton groups the
    # median of clipped group means is the median label
    est = fit_mom(data, 0.1, TRIANGULAR, 3.0, 3, 0, [0.5])
    assert est.value == pytest.approx(0.0)


def test_fit_mom_partition_fixed_per_seed():
    p1 = mom_partition(100, 7, seed=3)
    p2 = mom_partition(100, 7, seed=3)
    assert np.array_equal(p1, p2)
    counts = np.bincount(p1, minlength=7)
    assert counts.max() - counts.min() <= 1


def test_fit_mom_all_windows_empty():
    data = _dataset_1d([0.9], [5.0])
    est = fit_mom(data, 0.05, TRIANGULAR, 3.0, 4, 0, [0.1])
    assert (est.value, est.n_window) == (0.0, 0)


# --- fit_trimmed -----------------------------------------------------------


def test_fit_trimmed_zero_fraction_equals_nw():
    data = generate_synthetic(300, 1, TargetFunction.sine_1d(), NoiseSpec(0.5), seed=2)
    for x in ([0.2], [0.8]):
        tr = fit_trimmed(data, 0.1, TRIANGULAR, 3.0, 0.0, x)
        nw = fit_nw(data, 0.1, TRIANGULAR, 3.0, x)
        assert tr.value == pytest.approx(nw.value, abs=1e-12)


def test_fit_trimmed_removes_extremes():
    data = _dataset_1d([0.48, 0.49, 0.5, 0.51, 0.52], [-100.0, 0.0, 0.0, 0.0, 100.0])
    est = fit_trimmed(data, 0.1, UNIFORM, 3.0, 0.2, [0.5])
    assert est.value == pytest.approx(0.0)


def test_fit_trimmed_drop_counts():
    # n = 10, trim 0.2: exactly ceil(2) = 2 dropped on each side
    positions = np.linspace(0.45, 0.55, 10)
    labels = np.array([50.0, 40.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, -40.0, -50.0])
    data = _dataset_1d(positions, labels)
    est = fit_trimmed(data, 0.2, UNIFORM, 3.0, 0.2, [0.5])
    assert est.value == pytest.approx(1.0)


def test_fit_trimmed_fallback_to_median():
    data = _dataset_1d([0.5, 0.51], [2.0, 4.0])
    # trimming 1 from each side empties the 2-sample window; median fallback
    est = fit_trimmed(data, 0.1, TRIANGULAR, 3.0, 0.4, [0.5])
    assert est.value == pytest.approx(3.0)


# --- shared estimator properties ------------------------------------------


def _random_window_dataset(rng, n):
    pos = rng.uniform(0.45, 0.55, n)
    labels = rng.uniform(-10.0, 10.0, n)
    return _dataset_1d(pos, labels)


def test_output_always_clipped():
    rng = np.random.default_rng(3)
    for _ in range(20):
        data = _random_window_dataset(rng, int(rng.integers(1, 40)))
        x = [0.5]
        for est in (
            fit_huber(data, PARAMS, TRIANGULAR, x),
            fit_nw(data, 0.1, TRIANGULAR, 3.0, x),
            fit_mom(data, 0.1, TRIANGULAR, 3.0, 5, 0, x),
            fit_trimmed(data, 0.1, TRIANGULAR, 3.0, 0.2, x),
        ):
            assert -3.0 <= est.value <= 3.0


def test_huber_equals_nw_when_spread_below_threshold():
    # window spread max - min <= T makes the Huber loss purely quadratic
    # around the minimizer, so both estimators coincide
    rng = np.random.default_rng(4)
    for _ in range(20):
        n = int(rng.integers(2, 30))
        center = rng.uniform(-2, 2)
        labels = center + rng.uniform(-0.5, 0.5, n)  # spread < T = 1
        data = _random_window_dataset(rng, n).with_labels(labels)
        hub = fit_huber(data, PARAMS, TRIANGULAR, [0.5], tol=1e-10)
        nw = fit_nw(data, 0.1, TRIANGULAR, 3.0, [0.5])
        assert hub.value == pytest.approx(nw.value, abs=1e-6)


def test_translation_equivariance():
    rng = np.random.default_rng(5)
    for _ in range(10):
        n = int(rng.integers(3, 30))
        pos = rng.uniform(0.45, 0.55, n)
        labels = rng.uniform(-1.0, 1.0, n)
        c = rng.uniform(-1.0, 1.0)
        a = _dataset_1d(pos, labels)
        b = _dataset_1d(pos, labels + c)
        hub_a = fit_huber(a, PARAMS, TRIANGULAR, [0.5], tol=1e-9)
        hub_b = fit_huber(b, PARAMS, TRIANGULAR, [0.5], tol=1e-9)
        assert hub_b.value == pytest.approx(hub_a.value + c, abs=1e-6)
        nw_a = fit_nw(a, 0.1, TRIANGULAR, 3.0, [0.5])
        nw_b = fit_nw(b, 0.1, TRIANGULAR, 3.0, [0.5])
        assert nw_b.value == pytest.approx(nw_a.value + c, abs=1e-9)


def test_bounded_influence_of_single_label():
    # windows whose other residuals stay below T/2: one corrupted label moves
    # the estimate by at most 2 T c_hi / (c_lo n) plus solver tolerance
    rng = np.random.default_rng(6)
    for _ in range(20):
        n = int(rng.integers(8, 60))
        pos = rng.uniform(0.45, 0.55, n)
        labels = rng.uniform(-0.2, 0.2, n)  # residuals well inside T/2
        data = _dataset_1d(pos, labels)
        base = fit_huber(data, PARAMS, TRIANGULAR, [0.5], tol=1e-10)
        corrupted = labels.copy()
        corrupted[0] = rng.choice([-1.0, 1.0]) * 1e6
        moved = fit_huber(data.with_labels(corrupted), PARAMS, TRIANGULAR, [0.5], tol=1e-10)
        bound = 2 * 1.0 * TRIANGULAR.c_hi / (TRIANGULAR.c_lo * n) + 1e-6
        assert abs(moved.value - base.value) <= bound


def test_params_validation():
    with pytest.raises(ValueError):
        HuberParams(0.0, 1.0, 3.0)
    with pytest.raises(ValueError):
        HuberParams(0.1, -1.0, 3.0)
    with pytest.raises(ValueError):
        HuberParams(0.1, 1.0, 0.0)
