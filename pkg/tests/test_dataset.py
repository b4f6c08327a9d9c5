import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dwknn.dataset import (
    Dataset,
    DatasetError,
    NormalizationParams,
    SyntheticSpec,
    apply_zscore,
    class_sizes,
    fit_zscore,
    generate_synthetic,
    load_csv,
    preset,
    resolve_dataset,
    stratified_split,
)

from conftest import make_dataset


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


class TestLoadCsv:
    def test_iris_shape(self, iris):
        assert (iris.n_samples, iris.n_features, iris.class_count) == (150, 4, 3)
        assert list(iris.class_counts()) == [50, 50, 50]

    def test_iris_by_label_name(self):
        from importlib import resources
        with resources.as_file(resources.files("dwknn") / "data" / "iris.csv") as p:
            ds = load_csv(p, label_column="species")
        assert (ds.n_samples, ds.n_features, ds.class_count) == (150, 4, 3)

    def test_wine_and_breast_cancer_shapes(self, wine, breast_cancer):
        assert (wine.n_samples, wine.n_features, wine.class_count) == (178, 13, 3)
        assert (breast_cancer.n_samples, breast_cancer.n_features, breast_cancer.class_count) == (569, 30, 2)

    def test_first_appearance_encoding(self, tmp_path):
        p = write(tmp_path, "x,lab\n1,b\n2,a\n3,b\n")
        ds = load_csv(p, "lab")
        assert ds.labels.tolist() == [0, 1, 0]
        assert ds.class_names == ("b", "a")

    def test_single_class(self, tmp_path):
        p = write(tmp_path, "x,lab\n1,a\n2,a\n")
        with pytest.raises(DatasetError, match="single-class"):
            load_csv(p, "lab")

    def test_missing_file(self, tmp_path):
        with pytest.raises(DatasetError, match="no such file"):
            load_csv(tmp_path / "nope.csv")

    def test_empty_file(self, tmp_path):
        with pytest.raises(DatasetError, match="empty"):
            load_csv(write(tmp_path, ""))

    def test_unparseable_cell_reports_location(self, tmp_path):
        p = write(tmp_path, "x,y,lab\n1,2,a\n3,oops,b\n")
        with pytest.raises(DatasetError, match=r"row 3, column 'y'"):
            load_csv(p, "lab")

    def test_missing_label_column(self, tmp_path):
        with pytest.raises(DatasetError, match="not in header"):
            load_csv(write(tmp_path, "x,lab\n1,a\n2,b\n"), "target")

    def test_nan_rejected(self, tmp_path):
        with pytest.raises(DatasetError):
            load_csv(write(tmp_path, "x,lab\nnan,a\n2,b\n"), "lab")

    def test_dataset_invariants(self):
        with pytest.raises(DatasetError):
            Dataset(np.zeros((3, 1)), [0, 1], 2)
        with pytest.raises(DatasetError):
            Dataset(np.zeros((3, 1)), [0, 0, 0], 2)  # class 1 absent
        with pytest.raises(DatasetError):
            Dataset(np.zeros((2, 1)), [0, 2], 2)


class TestZscore:
    def test_hand_values(self):
        ds = make_dataset([[1], [2], [3]], [0, 1, 0])
        p = fit_zscore(ds)
        assert p.means[0] == 2.0
        assert p.stddevs[0] == pytest.approx(np.sqrt(2 / 3))
        z = apply_zscore(ds, p).features[:, 0]
        assert z == pytest.approx([-1.2247449, 0.0, 1.2247449])

    def test_constant_feature(self):
        ds = make_dataset([[5, 1], [5, 2], [5, 3]], [0, 1, 0])
        p = fit_zscore(ds)
        assert p.constant.tolist() == [True, False]
        assert p.stddevs[0] == 1.0
        assert apply_zscore(ds, p).features[:, 0].tolist() == [0.0, 0.0, 0.0]

    def test_iris_mean(self, iris):
        # brute-force mean of the first column, read independently of the loader
        import csv
        from importlib import resources
        with resources.as_file(resources.files("dwknn") / "data" / "iris.csv") as path:
            col = [float(r[0]) for r in list(csv.reader(open(path)))[1:]]
        oracle = sum(col) / len(col)
        assert fit_zscore(iris).means[0] == pytest.approx(oracle, rel=1e-12)
        assert oracle == pytest.approx(5.8433, abs=1e-4)

    def test_standardized(self, wine):
        z = apply_zscore(wine, fit_zscore(wine)).features
        assert np.allclose(z.mean(axis=0), 0, atol=1e-12)
        assert np.allclose(z.std(axis=0), 1, atol=1e-12)

    def test_train_params_on_test_fold(self, iris):
        tr, te = stratified_split(iris, 5, 0)[0]
        p = fit_zscore(iris.subset(tr))
        z = apply_zscore(iris.subset(te), p).features
        assert np.all(np.abs(z.mean(axis=0)) > 0)

    def test_dimension_mismatch(self, iris):
        with pytest.raises(DatasetError):
            apply_zscore(iris, NormalizationParams.identity(3))

    @given(st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(12, 4)) * rng.uniform(0.1, 100, size=4) + rng.normal(size=4) * 50
        ds = make_dataset(X, np.arange(12) % 2)
        p = fit_zscore(ds)
        back = p.inverse(p.transform(X))
        assert np.allclose(back, X, rtol=1e-9, atol=0)


class TestSynthetic:
    def test_imbalanced_sizes(self):
        assert class_sizes(1000, 3.6) == (783, 217)
        ds = generate_synthetic(SyntheticSpec("imbalanced_blobs", 1000, 10, 3.6, 1.0, 7))
        assert sorted(ds.class_counts().tolist()) == [217, 783]
        assert ds.features.shape == (1000, 10)

    def test_moons_zero_noise(self):
        ds = generate_synthetic(SyntheticSpec("moons", 200, 2, 1.0, 0.0, 1))
        assert ds.class_counts().tolist() == [100, 100]
        outer = ds.features[ds.labels == 0]
        inner = ds.features[ds.labels == 1]
        assert np.allclose(np.hypot(outer[:, 0], outer[:, 1]), 1.0)
        assert np.allclose(np.hypot(inner[:, 0] - 1.0, inner[:, 1] - 0.5), 1.0)
        assert outer[:, 1].min() >= -1e-12 and inner[:, 1].max() <= 0.5 + 1e-12

    @pytest.mark.parametrize("kind", ["balanced_blobs", "imbalanced_blobs", "overlap_blobs",
                                      "moons", "blobs_2d_imbalanced"])
    def test_deterministic(self, kind):
        d = 2 if kind in ("moons", "blobs_2d_imbalanced") else 5
        spec = SyntheticSpec(kind, 120, d, 2.0, 0.5, 99, label_noise=0.1)
        a, b = generate_synthetic(spec), generate_synthetic(spec)
        assert a.features.tobytes() == b.features.tobytes()
        assert a.labels.tobytes() == b.labels.tobytes()

    def test_label_noise_flips_exact_fraction(self):
        clean = generate_synthetic(SyntheticSpec("balanced_blobs", 500, 3, seed=4))
        noisy = generate_synthetic(SyntheticSpec("balanced_blobs", 500, 3, seed=4, label_noise=0.1))
        # same features, different row order: align rows by sorting
        a = np.lexsort(clean.features.T[::-1])
        b = np.lexsort(noisy.features.T[::-1])
        assert np.array_equal(clean.features[a], noisy.features[b])
        assert int(np.sum(clean.labels[a] != noisy.labels[b])) == 50

    @pytest.mark.parametrize("kwargs", [
        dict(class_ratio=0.5), dict(n_samples=2), dict(n_features=0), dict(noise_scale=-1),
    ])
    def test_invalid_spec(self, kwargs):
        base = dict(kind="balanced_blobs", n_samples=100, n_features=3)
        base.update(kwargs)
        with pytest.raises(DatasetError):
            SyntheticSpec(**base)

    def test_overlap_ordering(self):
        from dwknn.evaluation import run_cv
        acc = {n: run_cv(generate_synthetic(preset(n, 42), n), "uniform", 5, 42).scores.mean
               for n in ("syn_balanced", "syn_imbalanced", "syn_overlap")}
        assert acc["syn_balanced"] > acc["syn_overlap"]
        assert acc["syn_imbalanced"] > acc["syn_overlap"]


class TestStratifiedSplit:
    def test_exact_divisibility(self):
        y = np.array([0] * 6 + [1] * 4)
        for _, te in stratified_split(y, 2, 0):
            assert np.bincount(y[te]).tolist() == [3, 2]

    def test_iris_ten_per_class(self, iris):
        for _, te in stratified_split(iris, 5, 42):
            assert np.bincount(iris.labels[te]).tolist() == [10, 10, 10]

    def test_deterministic(self, iris):
        a = stratified_split(iris, 5, 3)
        b = stratified_split(iris, 5, 3)
        assert all(np.array_equal(x[1], y[1]) for x, y in zip(a, b))

    def test_class_too_small(self):
        with pytest.raises(DatasetError):
            stratified_split(np.array([0, 0, 0, 1, 1]), 3, 0)

    @given(sizes=st.lists(st.integers(3, 40), min_size=2, max_size=5),
           n_folds=st.integers(2, 3), seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=100, deadline=None)
    def test_partition_and_bound(self, sizes, n_folds, seed):
        y = np.repeat(np.arange(len(sizes)), sizes)
        y = np.random.default_rng(seed).permutation(y)
        folds = stratified_split(y, n_folds, seed)
        tests = np.concatenate([te for _, te in folds])
        assert sorted(tests.tolist()) == list(range(len(y)))
        for tr, te in folds:
            assert np.intersect1d(tr, te).size == 0
            assert len(tr) + len(te) == len(y)
            counts = np.bincount(y[te], minlength=len(sizes))
            for c, n_c in enumerate(sizes):
                assert abs(counts[c] - n_c / n_folds) <= 1


def test_resolve_unknown():
    with pytest.raises(DatasetError, match="unknown dataset"):
        resolve_dataset("no_such_thing")
