import numpy as np
import pytest
from scipy import stats

from robustkr import (
    DataError,
    Dataset,
    NoiseSpec,
    TargetFunction,
    generate_synthetic,
    load_csv,
    read_dataset_csv,
    save_dataset_csv,
    split_train_test,
)


SINE = TargetFunction.sine_1d()


def test_generate_paper_setup():
    data = generate_synthetic(10000, 1, SINE, NoiseSpec(1.0), seed=7)
    assert data.n == 10000
    assert data.dim == 1
    assert data.points.min() >= 0.0 and data.points.max() <= 1.0


def test_generate_zero_noise_constant_target():
    data = generate_synthetic(5, 1, TargetFunction.constant(0.0), NoiseSpec(0.0), seed=1)
    assert np.all(data.labels == 0.0)


def test_generate_label_mean_matches_monte_carlo_ci():
    # integral of sin(2 pi x) over [0,1] is 0; the sample mean of labels is a
    # Monte-Carlo estimate of it with sd <= sqrt(var(sin)+sigma^2)/sqrt(N)
    n = 10**5
    data = generate_synthetic(n, 1, SINE, NoiseSpec(1.0), seed=11)
    sd = np.sqrt(0.5 + 1.0) / np.sqrt(n)
    assert abs(data.labels.mean()) <= 3 * sd + 1e-3


def test_generate_seed_determinism():
    a = generate_synthetic(500, 2, TargetFunction.sine_cosine_2d(), NoiseSpec(0.3), seed=42)
    b = generate_synthetic(500, 2, TargetFunction.sine_cosine_2d(), NoiseSpec(0.3), seed=42)
    assert np.array_equal(a.points, b.points)
    assert np.array_equal(a.labels, b.labels)
    c = generate_synthetic(500, 2, TargetFunction.sine_cosine_2d(), NoiseSpec(0.3), seed=43)
    assert not np.array_equal(a.labels, c.labels)


def test_generate_residuals_pass_ks():
    # residuals are exactly N(0, sigma^2) by construction; KS at the 1% level
    data = generate_synthetic(10**4, 1, SINE, NoiseSpec(1.0), seed=3)
    resid = data.labels - SINE(data.points)
    stat = stats.kstest(resid, "norm", args=(0.0, 1.0)).statistic
    critical_1pct = 1.6276 / np.sqrt(data.n)
    assert stat < critical_1pct


def test_generate_errors():
    with pytest.raises(ValueError):
        generate_synthetic(0, 1, SINE, NoiseSpec(1.0), seed=0)
    with pytest.raises(ValueError):
        generate_synthetic(10, 2, SINE, NoiseSpec(1.0), seed=0)  # sine1d needs d=1


def test_dataset_immutable():
    data = generate_synthetic(10, 1, SINE, NoiseSpec(1.0), seed=0)
    with pytest.raises(ValueError):
        data.points[0, 0] = 0.5
    with pytest.raises(ValueError):
        data.labels[0] = 0.5


def test_dataset_invariants():
    with pytest.raises(ValueError):
        Dataset(np.array([[0.5], [1.5]]), np.array([0.0, 0.0]))
    with pytest.raises(ValueError):
        Dataset(np.array([[0.5]]), np.array([0.0, 1.0]))


def _write_csv(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_load_csv_minmax_scaling(tmp_path):
    path = _write_csv(tmp_path / "t.csv", "a,b\n2,1\n4,2\n6,3\n")
    data = load_csv(path, target_column="b")
    assert np.allclose(sorted(data.points[:, 0]), [0.0, 0.5, 1.0])
    assert np.allclose(sorted(data.labels), [0.0, 0.5, 1.0])


def test_load_csv_single_row_constant_rule(tmp_path):
    path = _write_csv(tmp_path / "t.csv", "a,b,y\n3.5,-2,7\n")
    data = load_csv(path, target_column="y")
    assert np.all(data.points == 0.0)
    assert np.all(data.labels == 0.0)


def test_load_csv_column_ranges(tmp_path):
    rng = np.random.default_rng(5)
    rowtext = "\n".join(",".join(f"{v:.6f}" for v in row) for row in rng.normal(size=(50, 3)))
    path = _write_csv(tmp_path / "t.csv", "a,b,y\n" + rowtext + "\n")
    data = load_csv(path, target_column="y")
    for j in range(data.dim):
        assert data.points[:, j].min() == pytest.approx(0.0)
        assert data.points[:, j].max() == pytest.approx(1.0)


def test_load_csv_sidecar(tmp_path):
    path = _write_csv(tmp_path / "t.csv", "a,y\n2,5\n4,9\n")
    sidecar = tmp_path / "scale.txt"
    load_csv(path, target_column="y", sidecar_path=sidecar)
    lines = sidecar.read_text().strip().splitlines()
    assert lines[0] == "column,min,max"
    assert lines[1].startswith("a,2,4")
    assert lines[2].startswith("y,5,9")


def test_load_csv_errors(tmp_path):
    with pytest.raises(DataError):
        load_csv(tmp_path / "missing.csv", target_column="y")
    path = _write_csv(tmp_path / "empty.csv", "a,y\n")
    with pytest.raises(DataError):
        load_csv(path, target_column="y")
    path = _write_csv(tmp_path / "bad.csv", "a,y\n1,2\n3,oops\n")
    with pytest.raises(DataError):
        load_csv(path, target_column="y")
    path = _write_csv(tmp_path / "col.csv", "a,y\n1,2\n")
    with pytest.raises(DataError):
        load_csv(path, target_column="z")


def test_dataset_csv_roundtrip(tmp_path):
    data = generate_synthetic(20, 2, TargetFunction.sine_cosine_2d(), NoiseSpec(0.5), seed=2)
    path = tmp_path / "d.csv"
    save_dataset_csv(data, path)
    back = read_dataset_csv(path)
    assert np.array_equal(back.points, data.points)
    assert np.array_equal(back.labels, data.labels)


def test_split_sizes():
    data = generate_synthetic(100, 1, SINE, NoiseSpec(1.0), seed=0)
    train, test = split_train_test(data, 0.9, seed=0)
    assert (train.n, test.n) == (90, 10)


def test_split_rounding_on_abalone_size():
    # round-half-to-even of 0.9 * 4177 = 3759.3 -> 3759
    data = generate_synthetic(4177, 1, TargetFunction.constant(0.0), NoiseSpec(0.0), seed=0)
    train, test = split_train_test(data, 0.9, seed=5)
    assert (train.n, test.n) == (3759, 418)


def test_split_deterministic_and_disjoint():
    data = generate_synthetic(200, 1, SINE, NoiseSpec(1.0), seed=9)
    t1, s1 = split_train_test(data, 0.7, seed=4)
    t2, s2 = split_train_test(data, 0.7, seed=4)
    assert np.array_equal(t1.points, t2.points) and np.array_equal(s1.labels, s2.labels)
    merged = np.concatenate([t1.labels, s1.labels])
    assert np.array_equal(np.sort(merged), np.sort(data.labels))


def test_split_fraction_range():
    data = generate_synthetic(10, 1, SINE, NoiseSpec(1.0), seed=0)
    for bad in (0.0, 1.0, -0.2, 1.7):
        with pytest.raises(ValueError):
            split_train_test(data, bad, seed=0)


def test_target_by_name():
    assert TargetFunction.by_name("sine1d")(np.array([[0.25]]))[0] == pytest.approx(1.0)
    assert TargetFunction.by_name("sincos2d")(np.array([[0.25, 0.0]]))[0] == pytest.approx(2.0)
    assert TargetFunction.by_name("constant(2.5)")(np.array([[0.1, 0.2, 0.3]]))[0] == 2.5
    with pytest.raises(ValueError):
        TargetFunction.by_name("nope")


def test_target_from_table():
    table = TargetFunction.from_table([np.array([0.0, 1.0])], np.array([1.0, 3.0]))
    assert table(np.array([[0.5]]))[0] == pytest.approx(2.0)
