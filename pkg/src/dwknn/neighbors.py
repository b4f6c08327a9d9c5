"""Exact brute-force k-nearest-neighbor retrieval."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .distance import Metric, pairwise


@dataclass(frozen=True, eq=False)
class NeighborSet:
    indices: np.ndarray
    distances: np.ndarray
    labels: np.ndarray
    validities: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.indices)


def select_nearest(dist: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k smallest entries per row of `dist`.

    Equal distances are ordered by lower column index, so the result never
    depends on the sort implementation.
    """
    order = np.argsort(dist, axis=-1, kind="stable")
    return order[..., :k]


def knn_search_batch(train_X, queries, k: int, m: Metric = Metric(), exclude=None):
    """Neighbors for every query row.

    Returns ``(indices, distances)``, both M x k. `exclude` is an optional
    length-M array giving one training index per query that must not be
    returned (leave-one-out).
    """
    train_X = np.asarray(train_X, dtype=float)
    n = train_X.shape[0]
    limit = n - 1 if exclude is not None else n
    if not 1 <= k <= limit:
        raise ValueError(f"k={k} out of range 1..{limit}")
    D = pairwise(m, queries, train_X)
    if exclude is not None:
        exclude = np.asarray(exclude, dtype=np.int64)
        D[np.arange(D.shape[0]), exclude] = np.inf
    idx = select_nearest(D, k)
    return idx, np.take_along_axis(D, idx, axis=-1)


def knn_search(train, query, k: int, m: Metric = Metric(), exclude: Optional[int] = None) -> NeighborSet:
    """The k nearest training points to a single query."""
    query = np.asarray(query, dtype=float)
    ex = None if exclude is None else [exclude]
    idx, dist = knn_search_batch(train.features, query[None, :], k, m, exclude=ex)
    return NeighborSet(idx[0], dist[0], train.labels[idx[0]])
