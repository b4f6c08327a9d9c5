"""Fit phase: store the training set and precompute per-instance validity."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .dataset import Dataset, NormalizationParams, apply_zscore, fit_zscore
from .distance import Metric
from .neighbors import knn_search, knn_search_batch

POOLINGS = ("mean", "min", "median")
MODEL_FORMAT = "dwknn-model/1"


@dataclass(frozen=True)
class DwknnConfig:
    k: int = 5
    k_v: int = 10
    gamma: float = 1.0
    pooling: str = "mean"
    metric: Metric = field(default_factory=Metric)
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.k_v < 1:
            raise ValueError(f"k_v must be >= 1, got {self.k_v}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.pooling not in POOLINGS:
            raise ValueError(f"pooling must be one of {POOLINGS}, got {self.pooling!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DwknnConfig":
        d = dict(d)
        d["metric"] = Metric(**d.get("metric", {}))
        return cls(**d)


@dataclass(frozen=True, eq=False)
class FittedModel:
    train: Dataset
    validities: np.ndarray
    config: DwknnConfig
    norm: NormalizationParams

    def transform(self, X) -> np.ndarray:
        """Map raw feature rows into the model's normalized space."""
        return self.norm.transform(X)


def compute_validity(train: Dataset, i: int, k_v: int, m: Metric = Metric()) -> float:
    """Fraction of the `k_v` nearest neighbors of point `i` (itself excluded)
    that carry the same label as `i`."""
    if k_v >= train.n_samples:
        raise ValueError(f"k_v={k_v} needs at least {k_v + 1} training points")
    nb = knn_search(train, train.features[i], k_v, m, exclude=i)
    return int(np.sum(nb.labels == train.labels[i])) / k_v


def validity_scores(train: Dataset, k_v: int, m: Metric = Metric()) -> np.ndarray:
    n = train.n_samples
    if k_v >= n:
        raise ValueError(f"k_v={k_v} needs at least {k_v + 1} training points")
    out = np.empty(n)
    # blocks of rows keep the n x n distance matrix out of memory
    step = max(1, (1 << 22) // max(1, n))
    for start in range(0, n, step):
        rows = np.arange(start, min(n, start + step))
        idx, _ = knn_search_batch(train.features, train.features[rows], k_v, m, exclude=rows)
        agree = np.sum(train.labels[idx] == train.labels[rows, None], axis=1)
        out[rows] = agree / k_v
    return out


def fit(ds: Dataset, cfg: DwknnConfig = DwknnConfig(), norm: Optional[NormalizationParams] = None) -> FittedModel:
    """Normalize `ds` and compute the validity of every training point.

    With ``norm=None`` z-score parameters are fit on `ds`; pass
    ``NormalizationParams.identity(d)`` for data that is already normalized.
    """
    n = ds.n_samples
    if n < max(cfg.k, cfg.k_v) + 1:
        raise ValueError(
            f"{ds.name}: {n} training points is too few for k={cfg.k}, k_v={cfg.k_v}"
        )
    if norm is None:
        norm = fit_zscore(ds)
    train = apply_zscore(ds, norm)
    validities = validity_scores(train, cfg.k_v, cfg.metric)
    validities.setflags(write=False)
    return FittedModel(train, validities, cfg, norm)


# --- persistence ---------------------------------------------------------------
#
# Line 1:  "#dwknn-model/1 " followed by a JSON object with keys
#          config, norm {means, stddevs, constant}, class_count, name,
#          feature_names, class_names.
# Line 2:  CSV header  f0..f{d-1},label,validity
# Lines 3+: one training point per line: normalized features, class id, validity.
# Floats are written with repr() so a save/load cycle is exact.


def save_model(model: FittedModel, path) -> None:
    train = model.train
    meta = {
        "config": model.config.to_dict(),
        "norm": {
            "means": model.norm.means.tolist(),
            "stddevs": model.norm.stddevs.tolist(),
            "constant": model.norm.constant.tolist(),
        },
        "class_count": train.class_count,
        "name": train.name,
        "feature_names": list(train.feature_names) if train.feature_names else None,
        "class_names": list(train.class_names) if train.class_names else None,
    }
    buf = io.StringIO()
    buf.write(f"#{MODEL_FORMAT} {json.dumps(meta, sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"f{j}" for j in range(train.n_features)] + ["label", "validity"])
    for row, lab, v in zip(train.features, train.labels, model.validities):
        w.writerow([repr(float(x)) for x in row] + [int(lab), repr(float(v))])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def load_model(path) -> FittedModel:
    text = Path(path).read_text(encoding="utf-8")
    first, _, rest = text.partition("\n")
    tag = f"#{MODEL_FORMAT} "
    if not first.startswith(tag):
        raise ValueError(f"{path}: not a {MODEL_FORMAT} file")
    meta = json.loads(first[len(tag):])
    rows = list(csv.reader(io.StringIO(rest)))[1:]
    data = np.array([[float(x) for x in r] for r in rows if r])
    X, y, v = data[:, :-2], data[:, -2].astype(np.int64), data[:, -1].copy()
    train = Dataset(
        X, y, meta["class_count"], name=meta["name"],
        feature_names=meta["feature_names"], class_names=meta["class_names"],
    )
    nm = meta["norm"]
    norm = NormalizationParams(nm["means"], nm["stddevs"], nm["constant"])
    v.setflags(write=False)
    return FittedModel(train, v, DwknnConfig.from_dict(meta["config"]), norm)
