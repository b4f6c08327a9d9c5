"""Loading, normalization, synthetic generation and stratified splitting."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

CONSTANT_STD = 1e-12

BUNDLED = ("iris", "wine", "breast_cancer")
SYNTHETIC_KINDS = (
    "balanced_blobs",
    "imbalanced_blobs",
    "overlap_blobs",
    "moons",
    "blobs_2d_imbalanced",
)


class DatasetError(ValueError):
    pass


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    class_count: int
    name: str = "dataset"
    feature_names: Optional[tuple] = None
    class_names: Optional[tuple] = None

    def __post_init__(self):
        X = _frozen(self.features, float)
        y = _frozen(self.labels, np.int64)
        if X.ndim != 2:
            raise DatasetError(f"features must be 2-D, got shape {X.shape}")
        if X.shape[0] != y.shape[0]:
            raise DatasetError(f"{X.shape[0]} feature rows but {y.shape[0]} labels")
        if not np.all(np.isfinite(X)):
            raise DatasetError("features contain NaN or infinite values")
        if self.class_count < 2:
            raise DatasetError("need at least two classes")
        if y.size and (y.min() < 0 or y.max() >= self.class_count):
            raise DatasetError("label outside 0..class_count-1")
        counts = np.bincount(y, minlength=self.class_count)
        if np.any(counts == 0):
            missing = np.flatnonzero(counts == 0).tolist()
            raise DatasetError(f"classes {missing} have no members")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        if self.feature_names is not None:
            object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if self.class_names is not None:
            object.__setattr__(self, "class_names", tuple(self.class_names))

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.class_count)

    def subset(self, idx) -> "Dataset":
        """Rows `idx` as a new dataset; the class encoding is kept as-is."""
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset.__new__(Dataset)._init_unchecked(
            self.features[idx], self.labels[idx], self
        )

    def with_features(self, features) -> "Dataset":
        return Dataset.__new__(Dataset)._init_unchecked(features, self.labels, self)

    def _init_unchecked(self, features, labels, parent):
        # subsets may legitimately miss a class (e.g. a small fold)
        for name, value in (
            ("features", _frozen(features, float)),
            ("labels", _frozen(labels, np.int64)),
            ("class_count", parent.class_count),
            ("name", parent.name),
            ("feature_names", parent.feature_names),
            ("class_names", parent.class_names),
        ):
            object.__setattr__(self, name, value)
        return self


def load_csv(path, label_column: Union[str, int] = -1, name: Optional[str] = None) -> Dataset:
    """Read a headed CSV into a Dataset.

    Labels are re-encoded to 0..C-1 in order of first appearance; the original
    label strings are kept in ``class_names``.
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]
    if not rows:
        raise DatasetError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    if not body:
        raise DatasetError(f"{path}: no data rows")

    if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        if label_column not in header:
            raise DatasetError(f"{path}: label column {label_column!r} not in header")
        label_idx = header.index(label_column)
    else:
        label_idx = int(label_column)
        if not -len(header) <= label_idx < len(header):
            raise DatasetError(f"{path}: label column index {label_idx} out of range")
        label_idx %= len(header)

    feature_cols = [j for j in range(len(header)) if j != label_idx]
    X = np.empty((len(body), len(feature_cols)))
    raw_labels = []
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise DatasetError(
                f"{path}: row {i + 2} has {len(row)} cells, header has {len(header)}"
            )
        for out_j, j in enumerate(feature_cols):
            try:
                v = float(row[j])
            except ValueError:
                raise DatasetError(
                    f"{path}: cannot parse {row[j]!r} at row {i + 2}, column {header[j]!r}"
                ) from None
            if not math.isfinite(v):
                raise DatasetError(
                    f"{path}: non-finite value at row {i + 2}, column {header[j]!r}"
                )
            X[i, out_j] = v
        raw_labels.append(row[label_idx].strip())

    codes: dict = {}
    y = np.array([codes.setdefault(lab, len(codes)) for lab in raw_labels])
    if len(codes) < 2:
        raise DatasetError(f"{path}: single-class dataset")
    return Dataset(
        X,
        y,
        len(codes),
        name=name or path.stem,
        feature_names=[header[j] for j in feature_cols],
        class_names=list(codes),
    )


def load_bundled(name: str) -> Dataset:
    if name not in BUNDLED:
        raise DatasetError(f"unknown bundled dataset {name!r}; have {BUNDLED}")
    ref = resources.files("dwknn") / "data" / f"{name}.csv"
    with resources.as_file(ref) as path:
        return load_csv(path, label_column=-1, name=name)


# --- z-score normalization -------------------------------------------------


@dataclass(frozen=True, eq=False)
class NormalizationParams:
    means: np.ndarray
    stddevs: np.ndarray
    constant: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "means", _frozen(self.means, float))
        object.__setattr__(self, "stddevs", _frozen(self.stddevs, float))
        const = self.constant
        if const is None:
            const = np.zeros(self.means.shape, dtype=bool)
        object.__setattr__(self, "constant", _frozen(const, bool))

    @classmethod
    def identity(cls, n_features: int) -> "NormalizationParams":
        return cls(np.zeros(n_features), np.ones(n_features))

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.means.shape[0]:
            raise DatasetError(
                f"dimension mismatch: data has {X.shape[-1]} features, "
                f"normalization has {self.means.shape[0]}"
            )
        Z = (X - self.means) / self.stddevs
        return np.where(self.constant, 0.0, Z)

    def inverse(self, Z) -> np.ndarray:
        """Undo `transform`; constant features come back as their mean."""
        Z = np.asarray(Z, dtype=float)
        return Z * self.stddevs + self.means


def fit_zscore(ds: Dataset) -> NormalizationParams:
    X = ds.features
    if X.shape[0] < 2:
        raise DatasetError("z-score needs at least two samples")
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    constant = stds < CONSTANT_STD
    return NormalizationParams(means, np.where(constant, 1.0, stds), constant)


def apply_zscore(ds: Dataset, p: NormalizationParams) -> Dataset:
    return ds.with_features(p.transform(ds.features))


# --- synthetic data ---------------------------------------------------------

# class-mean separation in units of the base (unit) standard deviation
SEPARATION = {
    "balanced_blobs": 2.0,
    "imbalanced_blobs": 1.2,
    "overlap_blobs": 1.2,
    "blobs_2d_imbalanced": 8.0,
}


@dataclass(frozen=True)
class SyntheticSpec:
    kind: str
    n_samples: int = 1000
    n_features: int = 10
    class_ratio: float = 1.0
    noise_scale: float = 1.0
    seed: int = 0
    label_noise: float = 0.0

    def __post_init__(self):
        if self.kind not in SYNTHETIC_KINDS:
            raise DatasetError(f"unknown synthetic kind {self.kind!r}")
        if self.n_samples < 4:
            raise DatasetError("n_samples must be at least 2 per class")
        if self.n_features < 1:
            raise DatasetError("n_features must be positive")
        if self.kind in ("moons", "blobs_2d_imbalanced") and self.n_features != 2:
            raise DatasetError(f"{self.kind} is 2-D; n_features must be 2")
        if not self.class_ratio >= 1:
            raise DatasetError(f"class_ratio must be >= 1, got {self.class_ratio}")
        if not self.noise_scale >= 0:
            raise DatasetError("noise_scale must be non-negative")
        if not 0 <= self.label_noise < 0.5:
            raise DatasetError("label_noise must lie in [0, 0.5)")


def class_sizes(n_samples: int, ratio: float) -> tuple:
    """Majority/minority sizes for a ``ratio : 1`` split, rounded to nearest."""
    majority = int(math.floor(n_samples * ratio / (ratio + 1.0) + 0.5))
    majority = min(max(majority, 2), n_samples - 2)
    return majority, n_samples - majority


def preset(name: str, seed: int = 0) -> SyntheticSpec:
    """Named synthetic datasets used by the benchmark roster."""
    presets = {
        "syn_balanced": SyntheticSpec("balanced_blobs", 1000, 10, 1.0, 1.0, seed),
        "syn_imbalanced": SyntheticSpec("imbalanced_blobs", 1000, 10, 3.6, 1.0, seed),
        "syn_overlap": SyntheticSpec("overlap_blobs", 1000, 10, 1.0, 1.5, seed),
        "moons": SyntheticSpec("moons", 400, 2, 1.0, 0.1, seed),
        "blobs_2d_imbalanced": SyntheticSpec("blobs_2d_imbalanced", 400, 2, 3.0, 1.0, seed),
    }
    if name not in presets:
        raise DatasetError(f"unknown synthetic preset {name!r}")
    return presets[name]


SYNTHETIC_PRESETS = ("syn_balanced", "syn_imbalanced", "syn_overlap", "moons",
                     "blobs_2d_imbalanced")


def generate_synthetic(spec: SyntheticSpec, name: Optional[str] = None) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "moons":
        X, y = _moons(spec, rng)
    else:
        X, y = _blobs(spec, rng)

    if spec.label_noise > 0:
        n_flip = int(round(spec.label_noise * len(y)))
        flip = rng.choice(len(y), size=n_flip, replace=False)
        y[flip] = 1 - y[flip]

    # rows are emitted shuffled so that file order carries no class information
    order = rng.permutation(len(y))
    return Dataset(
        X[order],
        y[order],
        2,
        name=name or spec.kind,
        feature_names=[f"x{j}" for j in range(spec.n_features)],
    )


def _blobs(spec, rng):
    n0, n1 = class_sizes(spec.n_samples, spec.class_ratio)
    d = spec.n_features
    sep = SEPARATION[spec.kind]
    if spec.kind == "blobs_2d_imbalanced":
        # majority lower-left, minority upper-right, tight enough to be separable
        offset = np.full(d, sep / (2.0 * math.sqrt(d)))
        scale = 0.5 * spec.noise_scale
    else:
        offset = np.full(d, sep / (2.0 * math.sqrt(d)))
        scale = spec.noise_scale
    X0 = rng.normal(size=(n0, d)) * scale - offset
    X1 = rng.normal(size=(n1, d)) * scale + offset
    X = np.vstack([X0, X1])
    y = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)])
    return X, y


def _moons(spec, rng):
    n_outer = spec.n_samples // 2
    n_inner = spec.n_samples - n_outer
    t_out = np.linspace(0.0, math.pi, n_outer)
    t_in = np.linspace(0.0, math.pi, n_inner)
    outer = np.column_stack([np.cos(t_out), np.sin(t_out)])
    inner = np.column_stack([1.0 - np.cos(t_in), 0.5 - np.sin(t_in)])
    X = np.vstack([outer, inner])
    if spec.noise_scale > 0:
        X = X + rng.normal(scale=spec.noise_scale, size=X.shape)
    y = np.concatenate([np.zeros(n_outer, dtype=np.int64), np.ones(n_inner, dtype=np.int64)])
    return X, y


# --- splitting ---------------------------------------------------------------


def stratified_split(ds_or_labels, n_folds: int, seed: int = 0) -> list:
    """Stratified K-fold partition as a list of ``(train_idx, test_idx)`` pairs.

    Each class is shuffled with `seed` and dealt round-robin over the folds,
    starting where the previous class stopped so fold sizes also stay balanced.
    """
    labels = ds_or_labels.labels if isinstance(ds_or_labels, Dataset) else np.asarray(ds_or_labels)
    if n_folds < 2:
        raise DatasetError("need at least two folds")
    counts = np.bincount(labels)
    present = np.flatnonzero(counts)
    if np.any(counts[present] < n_folds):
        small = [int(c) for c in present if counts[c] < n_folds]
        raise DatasetError(f"classes {small} have fewer than {n_folds} members")

    rng = np.random.default_rng(seed)
    fold_of = np.empty(len(labels), dtype=np.int64)
    offset = 0
    for c in present:
        members = rng.permutation(np.flatnonzero(labels == c))
        fold_of[members] = (offset + np.arange(len(members))) % n_folds
        offset += len(members)

    all_idx = np.arange(len(labels))
    return [(all_idx[fold_of != f], all_idx[fold_of == f]) for f in range(n_folds)]


def resolve_dataset(name: str, seed: int = 0, label_column: Union[str, int] = -1) -> Dataset:
    """Bundled name, synthetic preset name, or path to a CSV file."""
    if name in BUNDLED:
        return load_bundled(name)
    if name in SYNTHETIC_PRESETS:
        return generate_synthetic(preset(name, seed), name=name)
    if Path(name).exists():
        return load_csv(name, label_column=label_column)
    raise DatasetError(
        f"unknown dataset {name!r}: not bundled ({', '.join(BUNDLED)}), "
        f"not synthetic ({', '.join(SYNTHETIC_PRESETS)}), and no such file"
    )


def describe(ds: Dataset) -> str:
    counts = ", ".join(str(c) for c in ds.class_counts())
    return f"{ds.name}: N={ds.n_samples}, d={ds.n_features}, C={ds.class_count} ({counts})"


__all__: Sequence[str] = [
    "Dataset", "DatasetError", "NormalizationParams", "SyntheticSpec",
    "load_csv", "load_bundled", "fit_zscore", "apply_zscore", "generate_synthetic",
    "stratified_split", "resolve_dataset", "class_sizes", "preset",
]
