"""Cross-validation driver, classification metrics and method comparison."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import stats
from .baselines import BASELINE_KINDS, BaselineKind, predict_baseline_batch
from .classifier import predict_batch
from .dataset import Dataset, NormalizationParams, apply_zscore, fit_zscore, stratified_split
from .model import DwknnConfig, fit

METHODS = ("dwknn",) + BASELINE_KINDS
TIE_BAND = 1e-9


@dataclass(frozen=True)
class FoldScores:
    method: str
    dataset: str
    per_fold_accuracy: tuple

    @property
    def mean(self) -> float:
        return float(np.mean(self.per_fold_accuracy))

    @property
    def std(self) -> float:
        # population std over folds
        return float(np.std(self.per_fold_accuracy))

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "dataset": self.dataset,
            "per_fold_accuracy": list(self.per_fold_accuracy),
            "mean": self.mean,
            "std": self.std,
        }


@dataclass(frozen=True, eq=False)
class PerClassReport:
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    confusion: np.ndarray  # rows: truth, columns: prediction

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.confusion) / self.confusion.sum())

    def to_dict(self) -> dict:
        return {
            "precision": self.precision.tolist(),
            "recall": self.recall.tolist(),
            "f1": self.f1.tolist(),
            "support": self.support.tolist(),
            "confusion": self.confusion.tolist(),
        }


@dataclass(frozen=True, eq=False)
class CVResult:
    scores: FoldScores
    per_class: PerClassReport
    predictions: np.ndarray  # out-of-fold prediction for every row


def accuracy(pred, truth) -> float:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise ValueError("accuracy of an empty prediction list")
    return float(np.mean(pred == truth))


def confusion_matrix(pred, truth, n_classes: int) -> np.ndarray:
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(truth), np.asarray(pred)), 1)
    return cm


def per_class_metrics(pred, truth, n_classes: int) -> PerClassReport:
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.size and (min(pred.min(), truth.min()) < 0 or max(pred.max(), truth.max()) >= n_classes):
        raise ValueError("labels out of range")
    cm = confusion_matrix(pred, truth, n_classes)
    tp = np.diag(cm).astype(float)
    predicted = cm.sum(axis=0).astype(float)
    support = cm.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(predicted > 0, tp / predicted, 0.0)
        recall = np.where(support > 0, tp / support, 0.0)
        f1 = np.where(precision + recall > 0,
                      2 * precision * recall / (precision + recall), 0.0)
    return PerClassReport(precision, recall, f1, support, cm)


MethodSpec = Union[str, BaselineKind, DwknnConfig]


def _resolve(method: MethodSpec, cfg: DwknnConfig):
    if isinstance(method, DwknnConfig):
        return "dwknn", method
    if isinstance(method, BaselineKind):
        return method.kind, method
    if method == "dwknn":
        return "dwknn", cfg
    if method in BASELINE_KINDS:
        return method, BaselineKind(method)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def fit_predict(method: MethodSpec, train: Dataset, test_X, cfg: DwknnConfig = DwknnConfig(),
                start_index: int = 0) -> np.ndarray:
    """Fit on already-normalized `train` and predict the (normalized) rows of `test_X`."""
    name, spec = _resolve(method, cfg)
    if name == "dwknn":
        model = fit(train, spec, norm=NormalizationParams.identity(train.n_features))
        return predict_batch(model, test_X, start_index=start_index)
    return predict_baseline_batch(spec, train.features, train.labels, train.class_count,
                                  test_X, k=cfg.k, m=cfg.metric)


def run_cv(ds: Dataset, method: MethodSpec = "dwknn", n_folds: int = 5, seed: int = 0,
           cfg: DwknnConfig = DwknnConfig(), global_normalize: bool = False,
           folds: Optional[Sequence] = None) -> CVResult:
    """Stratified K-fold evaluation of one method on one dataset.

    Normalization is fit on each training fold unless `global_normalize`, in
    which case the whole dataset is z-scored once up front. Pass `folds` to
    reuse a split across methods.
    """
    name, _ = _resolve(method, cfg)
    if folds is None:
        folds = stratified_split(ds, n_folds, seed)
    if global_normalize:
        ds = apply_zscore(ds, fit_zscore(ds))

    preds = np.empty(ds.n_samples, dtype=np.int64)
    accs = []
    for train_idx, test_idx in folds:
        train, test = ds.subset(train_idx), ds.subset(test_idx)
        if not global_normalize:
            p = fit_zscore(train)
            train, test = apply_zscore(train, p), apply_zscore(test, p)
        fold_pred = fit_predict(method, train, test.features, cfg, start_index=int(test_idx[0]))
        preds[test_idx] = fold_pred
        accs.append(accuracy(fold_pred, test.labels))

    scores = FoldScores(name, ds.name, tuple(accs))
    return CVResult(scores, per_class_metrics(preds, ds.labels, ds.class_count), preds)


# --- comparison ---------------------------------------------------------------------


def significance_marker(p: float) -> str:
    if p is None or not math.isfinite(p):
        return "n/a"
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return "n.s."


@dataclass
class Comparison:
    baseline: str
    wins: int
    ties: int
    losses: int
    avg_diff: float
    t_test: stats.PairedTestResult
    wilcoxon: stats.PairedTestResult
    per_dataset: dict = field(default_factory=dict)

    @property
    def wtl(self) -> str:
        return f"{self.wins}/{self.ties}/{self.losses}"

    @property
    def significance(self) -> str:
        return significance_marker(self.t_test.p_value)

    def to_dict(self) -> dict:
        return {
            "baseline": self.baseline,
            "wtl": self.wtl,
            "avg_diff": self.avg_diff,
            "t_test": self.t_test.to_dict(),
            "wilcoxon": self.wilcoxon.to_dict(),
            "significance": self.significance,
            "per_dataset": {
                k: {"t_test": t.to_dict(), "wilcoxon": w.to_dict()}
                for k, (t, w) in self.per_dataset.items()
            },
        }


def compare_methods(scores: dict, reference: str = "dwknn") -> list:
    """Head-to-head comparison of `reference` against every other method.

    `scores` maps method -> {dataset -> FoldScores}. Wins/ties/losses are by
    dataset mean; the pooled paired tests run on the per-fold scores
    concatenated across datasets, and per-dataset tests are kept alongside.
    """
    if reference not in scores:
        raise ValueError(f"reference method {reference!r} not in scores")
    ref = scores[reference]
    datasets = sorted(ref)
    out = []
    for method in sorted(scores):
        if method == reference:
            continue
        other = scores[method]
        if sorted(other) != datasets:
            raise ValueError(f"{method} was evaluated on different datasets than {reference}")
        w = t = l = 0
        a_all, b_all = [], []
        per_dataset = {}
        for name in datasets:
            a, b = ref[name].per_fold_accuracy, other[name].per_fold_accuracy
            if len(a) != len(b):
                raise ValueError(f"fold count mismatch on {name}: {len(a)} vs {len(b)}")
            diff = ref[name].mean - other[name].mean
            if diff > TIE_BAND:
                w += 1
            elif diff < -TIE_BAND:
                l += 1
            else:
                t += 1
            a_all.extend(a)
            b_all.extend(b)
            per_dataset[name] = _tests(a, b)
        pooled_t, pooled_w = _tests(a_all, b_all)
        avg = math.fsum(x - y for x, y in zip(a_all, b_all)) / len(a_all)
        out.append(Comparison(method, w, t, l, avg, pooled_t, pooled_w, per_dataset))
    return out


def _tests(a, b):
    if len(a) >= 2:
        t = stats.paired_t_test(a, b)
    else:
        t = stats.PairedTestResult(math.nan, math.nan, len(a), math.nan, stats.T_PAIRED, True)
    return t, stats.wilcoxon_signed_rank(a, b)


# --- serialization ---------------------------------------------------------------------

RESULTS_HEADER = ["method", "dataset", "fold", "accuracy"]


def results_csv(fold_scores: Sequence[FoldScores]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULTS_HEADER)
    for fs in fold_scores:
        for i, acc in enumerate(fs.per_fold_accuracy):
            w.writerow([fs.method, fs.dataset, i, repr(float(acc))])
    return buf.getvalue()


def read_results_csv(text: str) -> dict:
    """Parse results.csv back into method -> {dataset -> FoldScores}."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != RESULTS_HEADER:
        raise ValueError(f"results file must start with header {','.join(RESULTS_HEADER)}")
    acc: dict = {}
    for lineno, r in enumerate(rows[1:], start=2):
        if not r:
            continue
        if len(r) != 4:
            raise ValueError(f"results line {lineno}: expected 4 fields, got {len(r)}")
        try:
            fold, value = int(r[2]), float(r[3])
        except ValueError:
            raise ValueError(f"results line {lineno}: bad fold or accuracy") from None
        acc.setdefault(r[0], {}).setdefault(r[1], {})[fold] = value
    out: dict = {}
    for method, by_ds in acc.items():
        for name, folds in by_ds.items():
            if sorted(folds) != list(range(len(folds))):
                raise ValueError(f"results for {method}/{name}: folds are not 0..{len(folds) - 1}")
            out.setdefault(method, {})[name] = FoldScores(
                method, name, tuple(folds[i] for i in range(len(folds)))
            )
    return out


# --- decision boundary grids -------------------------------------------------------------


def grid_axes(X, resolution: int = 200, margin: float = 0.1):
    """Evenly spaced x and y coordinates spanning the data bounds plus a margin."""
    X = np.asarray(X, dtype=float)
    lo, hi = X.min(axis=0), X.max(axis=0)
    pad = (hi - lo) * margin
    return (np.linspace(lo[0] - pad[0], hi[0] + pad[0], resolution),
            np.linspace(lo[1] - pad[1], hi[1] + pad[1], resolution))


def decision_grid(train: Dataset, method: MethodSpec, cfg: DwknnConfig = DwknnConfig(),
                  resolution: int = 200, margin: float = 0.1):
    """Predicted class over a resolution x resolution grid in raw feature space.

    Returns ``(xs, ys, labels)`` with ``labels[i, j]`` the class at ``(xs[j], ys[i])``.
    The method is fit on z-scored `train`; grid points get the same transform.
    """
    if train.n_features != 2:
        raise ValueError(f"{train.name} has {train.n_features} features; boundary grids need 2")
    xs, ys = grid_axes(train.features, resolution, margin)
    gx, gy = np.meshgrid(xs, ys)
    points = np.column_stack([gx.ravel(), gy.ravel()])
    p = fit_zscore(train)
    pred = fit_predict(method, apply_zscore(train, p), p.transform(points), cfg)
    return xs, ys, pred.reshape(resolution, resolution)
