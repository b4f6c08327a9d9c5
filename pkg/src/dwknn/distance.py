"""Distance functions shared by every classifier in the package."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

METRIC_KINDS = ("euclidean", "manhattan", "minkowski", "cosine")

# elements per broadcast block when computing query-to-train distances
_CHUNK_ELEMENTS = 1 << 22


@dataclass(frozen=True)
class Metric:
    kind: str = "euclidean"
    p: float = 3.0

    def __post_init__(self):
        if self.kind not in METRIC_KINDS:
            raise ValueError(f"unknown metric {self.kind!r}; expected one of {METRIC_KINDS}")
        if self.kind == "minkowski" and not self.p >= 1:
            raise ValueError(f"minkowski order must be >= 1, got {self.p}")

    def __str__(self):
        if self.kind == "minkowski":
            return f"minkowski(p={self.p:g})"
        return self.kind


def distance(m: Metric, a, b) -> float:
    """Distance between two vectors under metric `m`.

    Cosine distance is ``1 - cos(a, b)`` so that smaller means closer; a zero
    vector on either side yields the neutral value 1.0.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(pairwise(m, a[None, :], b[None, :])[0, 0])


def pairwise(m: Metric, queries, train) -> np.ndarray:
    """Return the M x N matrix of distances from each query row to each train row."""
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    train = np.atleast_2d(np.asarray(train, dtype=float))
    if queries.shape[1] != train.shape[1]:
        raise ValueError(
            f"dimension mismatch: queries have {queries.shape[1]} features, "
            f"train has {train.shape[1]}"
        )
    n_q, n_t = queries.shape[0], train.shape[0]
    out = np.empty((n_q, n_t))
    if n_q == 0 or n_t == 0:
        return out

    if m.kind == "cosine":
        return _cosine(queries, train)

    step = max(1, _CHUNK_ELEMENTS // max(1, n_t * train.shape[1]))
    for start in range(0, n_q, step):
        diff = np.abs(queries[start:start + step, None, :] - train[None, :, :])
        if m.kind == "euclidean":
            out[start:start + step] = np.sqrt(np.sum(diff * diff, axis=-1))
        elif m.kind == "manhattan":
            out[start:start + step] = np.sum(diff, axis=-1)
        else:
            out[start:start + step] = np.sum(diff ** m.p, axis=-1) ** (1.0 / m.p)
    return out


def _cosine(queries, train):
    q_norm = np.sqrt(np.sum(queries * queries, axis=1))
    t_norm = np.sqrt(np.sum(train * train, axis=1))
    # elementwise products summed per pair keep the result symmetric in (a, b)
    dots = np.empty((queries.shape[0], train.shape[0]))
    step = max(1, _CHUNK_ELEMENTS // max(1, train.size))
    for start in range(0, queries.shape[0], step):
        dots[start:start + step] = np.sum(
            queries[start:start + step, None, :] * train[None, :, :], axis=-1
        )
    denom = q_norm[:, None] * t_norm[None, :]
    zero = denom == 0
    if zero.any():
        log.warning("cosine distance with a zero vector; using neutral distance 1.0")
    with np.errstate(invalid="ignore", divide="ignore"):
        sim = np.where(zero, 0.0, dots / np.where(zero, 1.0, denom))
    return np.clip(1.0 - sim, 0.0, 2.0)
