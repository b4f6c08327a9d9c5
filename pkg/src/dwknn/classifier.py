"""Double-weighted prediction: pooled class distance times neighbor validity.

For a query, the k nearest training points are grouped by label.  Each class
present gets a distance weight ``exp(-gamma * delta_c)`` from its pooled
neighbor distance and a validity weight equal to the mean validity of its
neighbors; the class score is their product.  Ties on the top score go to the
smaller pooled distance, then to a seeded random draw.  If every score is
zero the prediction falls back to a plain majority vote.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import FittedModel
from .neighbors import NeighborSet, knn_search_batch

DELTA_TIE_TOL = 1e-12

SCORE_ARGMAX = "score_argmax"
TIE_LOW_DELTA = "tie_low_delta"
TIE_RANDOM = "tie_random"
FALLBACK_MAJORITY = "fallback_majority"


@dataclass(frozen=True)
class ClassScore:
    label: int
    delta: float
    w_dist: float
    w_valid: float
    score: float
    count: int


@dataclass(frozen=True)
class ClassScoreTable:
    rows: tuple
    predicted_class: int
    decision_path: str

    def row(self, label: int) -> ClassScore:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)

    def to_dict(self, class_names=None) -> dict:
        def name(c):
            return class_names[c] if class_names else c

        return {
            "classes": [
                {
                    "class": name(r.label),
                    "delta": r.delta,
                    "w_dist": r.w_dist,
                    "w_valid": r.w_valid,
                    "score": r.score,
                    "count": r.count,
                }
                for r in self.rows
            ],
            "predicted_class": name(self.predicted_class),
            "decision_path": self.decision_path,
        }


def _group(labels, values) -> dict:
    groups: dict = {}
    for lab, v in zip(labels.tolist(), values.tolist()):
        groups.setdefault(lab, []).append(v)
    return dict(sorted(groups.items()))


def _pool(values, pooling: str) -> float:
    if pooling == "mean":
        return math.fsum(values) / len(values)
    if pooling == "min":
        return min(values)
    if pooling == "median":
        return float(np.median(values))
    raise ValueError(f"unknown pooling {pooling!r}")


def pool_distances(neighbors: NeighborSet, pooling: str = "mean") -> dict:
    """Pooled neighbor distance per class present in the neighbor set."""
    if len(neighbors) == 0:
        raise ValueError("empty neighbor set")
    return {c: _pool(d, pooling) for c, d in _group(neighbors.labels, neighbors.distances).items()}


def distance_weight(delta: float, gamma: float) -> float:
    return math.exp(-gamma * delta)


def validity_weight(neighbors: NeighborSet) -> dict:
    if neighbors.validities is None:
        raise ValueError("neighbor validities not populated")
    return {
        c: math.fsum(v) / len(v)
        for c, v in _group(neighbors.labels, neighbors.validities).items()
    }


def majority_vote(labels) -> int:
    """Most frequent label; ties go to the lowest class id."""
    labels = np.asarray(labels)
    return int(np.argmax(np.bincount(labels)))


def score_neighbors(neighbors: NeighborSet, gamma: float, pooling: str = "mean",
                    rng_seed=None) -> ClassScoreTable:
    """Build the class score table for one neighbor set and pick the winner.

    `rng_seed` seeds the random draw used only when both the score and the
    pooled distance are tied.
    """
    deltas = pool_distances(neighbors, pooling)
    w_valid = validity_weight(neighbors)
    counts = np.bincount(neighbors.labels)
    rows = []
    for c, delta in deltas.items():
        wd = distance_weight(delta, gamma)
        wv = w_valid[c]
        rows.append(ClassScore(c, delta, wd, wv, wd * wv, int(counts[c])))

    best = max(r.score for r in rows)
    if best == 0.0:
        return ClassScoreTable(tuple(rows), majority_vote(neighbors.labels), FALLBACK_MAJORITY)

    top = [r for r in rows if r.score == best]
    if len(top) == 1:
        return ClassScoreTable(tuple(rows), top[0].label, SCORE_ARGMAX)

    min_delta = min(r.delta for r in top)
    closest = [r for r in top if r.delta - min_delta <= DELTA_TIE_TOL]
    if len(closest) == 1:
        return ClassScoreTable(tuple(rows), closest[0].label, TIE_LOW_DELTA)

    rng = np.random.default_rng(rng_seed)
    pick = closest[int(rng.integers(len(closest)))]
    return ClassScoreTable(tuple(rows), pick.label, TIE_RANDOM)


def _neighbor_sets(model: FittedModel, queries):
    cfg = model.config
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    if queries.shape[1] != model.train.n_features:
        raise ValueError(
            f"dimension mismatch: query has {queries.shape[1]} features, "
            f"model has {model.train.n_features}"
        )
    idx, dist = knn_search_batch(model.train.features, queries, cfg.k, cfg.metric)
    labels = model.train.labels
    for i in range(idx.shape[0]):
        yield NeighborSet(idx[i], dist[i], labels[idx[i]], model.validities[idx[i]])


def predict(model: FittedModel, query, query_index: int = 0):
    """Predict one (already normalized) query.

    Returns ``(class_id, ClassScoreTable)``. `query_index` selects the random
    stream used for a full tie, so that batch and single predictions agree.
    """
    query = np.asarray(query, dtype=float)
    if query.ndim != 1:
        raise ValueError("predict takes a single query vector")
    (nb,) = _neighbor_sets(model, query[None, :])
    cfg = model.config
    table = score_neighbors(nb, cfg.gamma, cfg.pooling, rng_seed=[cfg.seed, query_index])
    return table.predicted_class, table


def predict_batch(model: FittedModel, queries, return_tables: bool = False,
                  start_index: int = 0):
    """Predict every row of `queries`; row i uses tie stream ``start_index + i``."""
    queries = np.asarray(queries, dtype=float)
    if queries.size == 0:
        preds = np.empty(0, dtype=np.int64)
        return (preds, []) if return_tables else preds
    cfg = model.config
    preds = []
    tables: Optional[list] = [] if return_tables else None
    for i, nb in enumerate(_neighbor_sets(model, queries)):
        t = score_neighbors(nb, cfg.gamma, cfg.pooling, rng_seed=[cfg.seed, start_index + i])
        preds.append(t.predicted_class)
        if tables is not None:
            tables.append(t)
    preds = np.asarray(preds, dtype=np.int64)
    return (preds, tables) if return_tables else preds
