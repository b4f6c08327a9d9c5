"""The five comparison classifiers.

All of them vote over the same neighbor search as the double-weighted model.
Ties between classes always resolve to the lowest class id.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .distance import Metric
from .neighbors import knn_search_batch

BASELINE_KINDS = ("uniform", "distance", "kernel", "ensemble", "compactness")
DEFAULT_ENSEMBLE_KS = (3, 5, 7, 9)
EXACT_MATCH_TOL = 1e-12


@dataclass(frozen=True)
class BaselineKind:
    kind: str
    ensemble_ks: tuple = DEFAULT_ENSEMBLE_KS

    def __post_init__(self):
        if self.kind not in BASELINE_KINDS:
            raise ValueError(f"unknown baseline {self.kind!r}; expected one of {BASELINE_KINDS}")
        if not self.ensemble_ks or min(self.ensemble_ks) < 1:
            raise ValueError("ensemble_ks must be nonempty and all >= 1")


# --- votes over a sorted neighbor list ------------------------------------------
# `labels` and `dists` are the neighbor labels/distances in increasing distance.


def vote_uniform(labels, n_classes: int) -> int:
    return int(np.argmax(np.bincount(labels, minlength=n_classes)))


def vote_distance(labels, dists, n_classes: int) -> int:
    dists = np.asarray(dists, dtype=float)
    exact = np.flatnonzero(dists < EXACT_MATCH_TOL)
    if exact.size:
        return int(labels[exact[0]])
    w = np.bincount(labels, weights=1.0 / dists, minlength=n_classes)
    return int(np.argmax(w))


def vote_kernel(labels, dists, n_classes: int) -> int:
    dists = np.asarray(dists, dtype=float)
    w = np.bincount(labels, weights=np.exp(-dists * dists), minlength=n_classes)
    return int(np.argmax(w))


def vote_ensemble(labels, ks, n_classes: int) -> int:
    """Soft vote: average of per-k vote fractions.

    Fractions are accumulated as integers scaled by lcm(ks) so that equal
    averages compare equal.
    """
    lcm = reduce(lambda a, b: a * b // math.gcd(a, b), ks)
    total = np.zeros(n_classes, dtype=np.int64)
    for k in ks:
        total += np.bincount(labels[:k], minlength=n_classes) * (lcm // k)
    return int(np.argmax(total))


def vote_compactness(labels, dists, n_classes: int) -> int:
    """Class weight k_c / (1 + sigma_c), sigma_c the population std of the
    class's neighbor distances."""
    dists = np.asarray(dists, dtype=float)
    w = np.full(n_classes, -np.inf)
    for c in np.unique(labels):
        d = dists[labels == c]
        w[c] = len(d) / (1.0 + float(np.std(d)))
    return int(np.argmax(w))


# --- single-query entry points ----------------------------------------------------


def _neighbors(train, query, k, m):
    idx, dist = knn_search_batch(train.features, np.asarray(query, dtype=float)[None, :], k, m)
    return train.labels[idx[0]], dist[0]


def predict_uniform(train, query, k: int = 5, m: Metric = Metric()) -> int:
    labels, _ = _neighbors(train, query, k, m)
    return vote_uniform(labels, train.class_count)


def predict_distance(train, query, k: int = 5, m: Metric = Metric()) -> int:
    labels, dists = _neighbors(train, query, k, m)
    return vote_distance(labels, dists, train.class_count)


def predict_kernel(train, query, k: int = 5, m: Metric = Metric()) -> int:
    labels, dists = _neighbors(train, query, k, m)
    return vote_kernel(labels, dists, train.class_count)


def predict_ensemble(train, query, ks=DEFAULT_ENSEMBLE_KS, m: Metric = Metric()) -> int:
    labels, _ = _neighbors(train, query, max(ks), m)
    return vote_ensemble(labels, ks, train.class_count)


def predict_compactness(train, query, k: int = 5, m: Metric = Metric()) -> int:
    labels, dists = _neighbors(train, query, k, m)
    return vote_compactness(labels, dists, train.class_count)


def predict_baseline_batch(kind: BaselineKind, train_X, train_y, n_classes: int, queries,
                           k: int = 5, m: Metric = Metric()) -> np.ndarray:
    """Vectorized neighbor search followed by the chosen vote for every query."""
    queries = np.asarray(queries, dtype=float)
    if queries.shape[0] == 0:
        return np.empty(0, dtype=np.int64)
    train_y = np.asarray(train_y, dtype=np.int64)
    k_search = max(kind.ensemble_ks) if kind.kind == "ensemble" else k
    idx, dist = knn_search_batch(train_X, queries, k_search, m)
    labels = train_y[idx]
    out = np.empty(len(queries), dtype=np.int64)
    for i in range(len(queries)):
        lab, d = labels[i], dist[i]
        if kind.kind == "uniform":
            out[i] = vote_uniform(lab, n_classes)
        elif kind.kind == "distance":
            out[i] = vote_distance(lab, d, n_classes)
        elif kind.kind == "kernel":
            out[i] = vote_kernel(lab, d, n_classes)
        elif kind.kind == "ensemble":
            out[i] = vote_ensemble(lab, kind.ensemble_ks, n_classes)
        else:
            out[i] = vote_compactness(lab, d, n_classes)
    return out
