"""Command-line entry point: benchmark, sweep, boundary, predict, report."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import evaluation as ev
from .classifier import predict as dw_predict
from .dataset import (
    BUNDLED,
    Dataset,
    DatasetError,
    resolve_dataset,
    stratified_split,
)
from .distance import METRIC_KINDS, Metric
from .model import POOLINGS, DwknnConfig, fit, load_model, save_model

log = logging.getLogger("dwknn")

DESK_SCALE = ("iris", "wine", "breast_cancer", "syn_balanced", "syn_imbalanced", "syn_overlap")

SWEEP_DEFAULTS = {
    "k": [1, 3, 5, 7, 9, 11, 15, 21, 31],
    "k_v": [3, 5, 7, 10, 15, 20, 30],
    "gamma": [0.1, 0.3, 0.5, 0.7, 1.0, 1.5, 2.0, 3.0, 5.0, 10.0],
    "pooling": list(POOLINGS),
    "metric": list(METRIC_KINDS),
}

IMBALANCE_RATIO = 1.5


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    datasets: list = field(default_factory=list)
    methods: list = field(default_factory=lambda: list(ev.METHODS))
    folds: int = 5
    seed: int = 42
    dwknn: DwknnConfig = field(default_factory=DwknnConfig)
    sweep_axis: Optional[str] = None
    sweep_values: list = field(default_factory=list)
    output_dir: Path = Path("results")
    global_normalize: bool = False
    label_column: str = "-1"


# --- file helpers ------------------------------------------------------------------------


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _fmt(x: float) -> str:
    return repr(float(x))


def _load(cfg: RunConfig, name: str) -> Dataset:
    try:
        return resolve_dataset(name, seed=cfg.seed, label_column=cfg.label_column)
    except DatasetError as e:
        raise UsageError(str(e)) from None


# --- benchmark ----------------------------------------------------------------------------


def render_table(fold_scores, methods, datasets) -> str:
    """Accuracy table, one row per dataset; '*' marks the best method(s) per row."""
    by = {(fs.dataset, fs.method): fs for fs in fold_scores}
    header = ["Dataset"] + list(methods)
    lines = []
    for ds in datasets:
        present = [by[(ds, m)] for m in methods if (ds, m) in by]
        if not present:
            continue
        best = max(fs.mean for fs in present)
        cells = [ds]
        for m in methods:
            fs = by.get((ds, m))
            if fs is None:
                cells.append("-")
                continue
            star = "*" if best - fs.mean <= ev.TIE_BAND else " "
            cells.append(f"{fs.mean:.3f}±{fs.std:.3f}{star}")
        lines.append(cells)
    avg = ["Average"]
    cvstd = ["CV Std"]
    for m in methods:
        fss = [by[(ds, m)] for ds in datasets if (ds, m) in by]
        avg.append(f"{np.mean([f.mean for f in fss]):.4f}" if fss else "-")
        cvstd.append(f"{np.mean([f.std for f in fss]):.4f}" if fss else "-")
    rows = [header] + lines + [avg, cvstd]
    widths = [max(len(r[j]) for r in rows) for j in range(len(header))]
    out = []
    for i, r in enumerate(rows):
        out.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
        if i == 0 or i == len(lines):
            out.append("-" * (sum(widths) + 2 * (len(widths) - 1)))
    return "\n".join(out) + "\n"


def cmd_benchmark(cfg: RunConfig) -> int:
    fold_scores, per_class, failures = [], {}, []
    datasets_done = []
    for name in cfg.datasets:
        try:
            ds = _load(cfg, name)
            folds = stratified_split(ds, cfg.folds, cfg.seed)
        except (UsageError, DatasetError, ValueError) as e:
            failures.append((name, "*", str(e)))
            continue
        datasets_done.append(ds.name)
        for method in cfg.methods:
            try:
                res = ev.run_cv(ds, method, cfg.folds, cfg.seed, cfg=cfg.dwknn,
                                global_normalize=cfg.global_normalize, folds=folds)
            except ValueError as e:
                failures.append((ds.name, method, str(e)))
                continue
            fold_scores.append(res.scores)
            entry = res.per_class.to_dict()
            entry["class_names"] = list(ds.class_names) if ds.class_names else None
            per_class.setdefault(ds.name, {})[method] = entry
            log.info("%s / %s: %.4f ± %.4f", ds.name, method, res.scores.mean, res.scores.std)

    out = cfg.output_dir
    report = {
        "config": _config_dict(cfg),
        "scores": [fs.to_dict() for fs in fold_scores],
        "per_class": per_class,
        "failures": [{"dataset": d, "method": m, "error": e} for d, m, e in failures],
    }
    table = render_table(fold_scores, cfg.methods, datasets_done)
    _write_atomic(out / "results.csv", ev.results_csv(fold_scores))
    _write_atomic(out / "report.json", _json_text(report))
    _write_atomic(out / "table.txt", table)
    print(table, end="")
    return _report_failures(failures)


def _report_failures(failures) -> int:
    for d, m, e in failures:
        print(f"FAILED {d} / {m}: {e}", file=sys.stderr)
    return 1 if failures else 0


def _config_dict(cfg: RunConfig) -> dict:
    return {
        "command": cfg.command,
        "datasets": list(cfg.datasets),
        "methods": list(cfg.methods),
        "folds": cfg.folds,
        "seed": cfg.seed,
        "dwknn": cfg.dwknn.to_dict(),
        "global_normalize": cfg.global_normalize,
    }


# --- sweep ----------------------------------------------------------------------------------


def _parse_sweep_value(axis: str, raw: str):
    try:
        if axis in ("k", "k_v"):
            return int(raw)
        if axis == "gamma":
            return float(raw)
    except ValueError:
        raise UsageError(f"bad value {raw!r} for sweep axis {axis}") from None
    if axis == "pooling" and raw not in POOLINGS:
        raise UsageError(f"bad pooling {raw!r}; expected one of {POOLINGS}")
    if axis == "metric" and raw not in METRIC_KINDS:
        raise UsageError(f"bad metric {raw!r}; expected one of {METRIC_KINDS}")
    return raw


def _with_axis(base: DwknnConfig, axis: str, value) -> DwknnConfig:
    if axis == "metric":
        return replace(base, metric=Metric(value, base.metric.p))
    return replace(base, **{axis: value})


def cmd_sweep(cfg: RunConfig) -> int:
    axis = cfg.sweep_axis
    if axis not in SWEEP_DEFAULTS:
        raise UsageError(f"--sweep-axis must be one of {sorted(SWEEP_DEFAULTS)}")
    values = cfg.sweep_values or SWEEP_DEFAULTS[axis]
    methods = cfg.methods
    if axis in ("k_v", "gamma", "pooling") and methods != ["dwknn"]:
        # these knobs only exist in the double-weighted model
        methods = [m for m in methods if m == "dwknn"] or ["dwknn"]

    rows, failures = [], []
    for name in cfg.datasets:
        ds = _load(cfg, name)
        folds = stratified_split(ds, cfg.folds, cfg.seed)
        smallest_train = min(len(tr) for tr, _ in folds)
        for value in values:
            try:
                run_cfg = _with_axis(cfg.dwknn, axis, value)
            except (TypeError, ValueError) as e:
                raise UsageError(f"invalid {axis}={value}: {e}") from None
            if max(run_cfg.k, run_cfg.k_v) >= smallest_train:
                raise UsageError(
                    f"invalid {axis}={value} for {ds.name}: training folds have "
                    f"{smallest_train} points"
                )
            for method in methods:
                try:
                    res = ev.run_cv(ds, method, cfg.folds, cfg.seed, cfg=run_cfg,
                                    global_normalize=cfg.global_normalize, folds=folds)
                except ValueError as e:
                    failures.append((ds.name, f"{method}@{axis}={value}", str(e)))
                    continue
                rows.append([axis, value, ds.name, method, _fmt(res.scores.mean),
                             _fmt(res.scores.std)])
                log.info("%s %s=%s %s: %.4f", ds.name, axis, value, method, res.scores.mean)

    text = _csv_text(["axis", "axis_value", "dataset", "method", "mean", "std"], rows)
    _write_atomic(cfg.output_dir / "sweep.csv", text)
    for r in rows:
        print(f"{r[2]:<16} {r[3]:<12} {axis}={r[1]!s:<10} {float(r[4]):.4f} ± {float(r[5]):.4f}")
    return _report_failures(failures)


# --- boundary -------------------------------------------------------------------------------


def cmd_boundary(cfg: RunConfig, resolution: int = 200) -> int:
    grid_rows, train_rows = [], []
    for name in cfg.datasets:
        ds = _load(cfg, name)
        if ds.n_features != 2:
            raise UsageError(f"{ds.name} has {ds.n_features} features; boundary needs 2-D data")
        for x, y, lab in zip(ds.features[:, 0], ds.features[:, 1], ds.labels):
            train_rows.append([ds.name, _fmt(x), _fmt(y), int(lab)])
        for method in cfg.methods:
            xs, ys, grid = ev.decision_grid(ds, method, cfg.dwknn, resolution=resolution)
            for i, yv in enumerate(ys):
                for j, xv in enumerate(xs):
                    grid_rows.append([ds.name, _fmt(xv), _fmt(yv), method, int(grid[i, j])])
            res = ev.run_cv(ds, method, cfg.folds, cfg.seed, cfg=cfg.dwknn,
                            global_normalize=cfg.global_normalize)
            print(f"{ds.name:<20} {method:<12} cv accuracy {res.scores.mean:.4f}")

    _write_atomic(cfg.output_dir / "boundary.csv",
                  _csv_text(["dataset", "x", "y", "method", "predicted_class"], grid_rows))
    _write_atomic(cfg.output_dir / "boundary_train.csv",
                  _csv_text(["dataset", "x", "y", "label"], train_rows))
    return 0


# --- predict ----------------------------------------------------------------------------------


def _read_queries(args, n_features: int) -> np.ndarray:
    rows = []
    for q in args.query or []:
        try:
            rows.append([float(v) for v in q.split(",")])
        except ValueError:
            raise UsageError(f"cannot parse query {q!r}") from None
    if args.queries:
        with open(args.queries, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            next(reader, None)
            for lineno, r in enumerate(reader, start=2):
                if not r:
                    continue
                try:
                    rows.append([float(v) for v in r[:n_features]])
                except ValueError:
                    raise UsageError(f"{args.queries}: bad value on line {lineno}") from None
    for r in rows:
        if len(r) != n_features:
            raise UsageError(f"query has {len(r)} values, model expects {n_features}")
    return np.asarray(rows, dtype=float).reshape(-1, n_features)


def cmd_predict(cfg: RunConfig, args) -> int:
    if args.model:
        model = load_model(args.model)
    else:
        if len(cfg.datasets) != 1:
            raise UsageError("predict needs exactly one --datasets entry or --model")
        model = fit(_load(cfg, cfg.datasets[0]), cfg.dwknn)
    if args.save_model:
        save_model(model, args.save_model)

    queries = _read_queries(args, model.train.n_features)
    names = model.train.class_names
    out = []
    for i, q in enumerate(model.transform(queries)):
        label, table = dw_predict(model, q, query_index=i)
        if args.explain:
            out.append(table.to_dict(names))
        else:
            out.append(names[label] if names else label)
    if args.explain:
        print(json.dumps(out, indent=2))
    else:
        for lab in out:
            print(lab)
    return 0


# --- report -------------------------------------------------------------------------------------


def cmd_report(cfg: RunConfig) -> int:
    src = cfg.output_dir
    try:
        scores = ev.read_results_csv((src / "results.csv").read_text(encoding="utf-8"))
        report = json.loads((src / "report.json").read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise UsageError(f"missing benchmark output: {e.filename}") from None
    except (ValueError, json.JSONDecodeError) as e:
        raise UsageError(f"corrupt benchmark output in {src}: {e}") from None

    comp_rows, lines = [], []
    if "dwknn" in scores and len(scores) > 1:
        comparisons = ev.compare_methods(scores)
        lines.append(f"{'Baseline':<14} {'W/T/L':<8} {'Avg Diff':>9} {'p-value':>10} {'Sig.':>5}"
                     f" {'Wilcoxon W':>11} {'p (W)':>10}")
        for c in comparisons:
            p = c.t_test.p_value
            lines.append(
                f"{c.baseline:<14} {c.wtl:<8} {c.avg_diff:>+9.4f} {_pfmt(p):>10} "
                f"{c.significance:>5} {_nfmt(c.wilcoxon.statistic):>11} "
                f"{_pfmt(c.wilcoxon.p_value):>10}"
            )
            comp_rows.append([c.baseline, c.wtl, _fmt(c.avg_diff), _nfmt(c.t_test.statistic),
                              _nfmt(p), c.significance, _nfmt(c.wilcoxon.statistic),
                              _nfmt(c.wilcoxon.p_value), c.t_test.n])
    else:
        lines.append("no comparison: need dwknn and at least one other method")

    lines.append("")
    lines.append(f"{'Dataset':<16} {'Method':<12} {'Mean':>7} {'Std':>7}")
    for method in sorted(scores):
        for name, fs in sorted(scores[method].items()):
            lines.append(f"{name:<16} {method:<12} {fs.mean:>7.4f} {fs.std:>7.4f}")

    pc_rows = []
    pc_lines = []
    for name, by_method in sorted(report.get("per_class", {}).items()):
        any_entry = next(iter(by_method.values()))
        support = np.asarray(any_entry["support"])
        if support.min() == 0 or support.max() / support.min() < IMBALANCE_RATIO:
            continue
        order = list(np.argsort(support, kind="stable"))
        pc_lines.append(f"\nPer-class performance on {name}")
        pc_lines.append(f"{'Class':<22} {'Classifier':<12} {'Precision':>9} {'Recall':>7} {'F1':>7}")
        for rank, c in enumerate(order):
            tag = "Minority" if rank == 0 else ("Majority" if rank == len(order) - 1 else "Class")
            for method, entry in sorted(by_method.items()):
                p, r, f = entry["precision"][c], entry["recall"][c], entry["f1"][c]
                pc_lines.append(f"{f'{tag} ({c})':<22} {method:<12} {p:>9.4f} {r:>7.4f} {f:>7.4f}")
                pc_rows.append([name, int(c), tag.lower(), method, _fmt(p), _fmt(r), _fmt(f),
                                int(entry["support"][c])])

    text = "\n".join(lines + pc_lines) + "\n"
    _write_atomic(src / "comparison.csv", _csv_text(
        ["baseline", "wtl", "avg_diff", "t_statistic", "p_value", "significance",
         "wilcoxon_w", "wilcoxon_p", "n"], comp_rows))
    _write_atomic(src / "perclass.csv", _csv_text(
        ["dataset", "class", "role", "method", "precision", "recall", "f1", "support"], pc_rows))
    _write_atomic(src / "comparison.txt", text)
    print(text, end="")
    return 0


def _pfmt(p) -> str:
    if p is None or not np.isfinite(p):
        return "n/a"
    return "<0.001" if p < 0.001 else f"{p:.3f}"


def _nfmt(x) -> str:
    return "" if x is None or not np.isfinite(x) else _fmt(x)


# --- argument parsing ---------------------------------------------------------------------------


def _split(s: Optional[str]) -> list:
    return [x.strip() for x in s.split(",") if x.strip()] if s else []


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--datasets", help=f"comma list of bundled ({', '.join(BUNDLED)}), "
                        "synthetic presets, or CSV paths")
    common.add_argument("--all", action="store_true", help="use the six desk-scale datasets")
    common.add_argument("--methods", help=f"comma list from {', '.join(ev.METHODS)}")
    common.add_argument("--label-column", default="-1",
                        help="label column name or index for CSV paths (default: last)")
    common.add_argument("--folds", type=int, default=5)
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--k", type=int, default=5)
    common.add_argument("--kv", type=int, default=10)
    common.add_argument("--gamma", type=float, default=1.0)
    common.add_argument("--pooling", choices=POOLINGS, default="mean")
    common.add_argument("--metric", choices=METRIC_KINDS, default="euclidean")
    common.add_argument("--minkowski-p", type=float, default=3.0)
    common.add_argument("--global-normalize", action="store_true",
                        help="z-score the whole dataset once instead of per training fold")
    common.add_argument("--out", default="results", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="dwknn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("benchmark", parents=[common], help="cross-validate methods on datasets")
    sw = sub.add_parser("sweep", parents=[common], help="one-axis hyperparameter sweep")
    sw.add_argument("--sweep-axis", choices=sorted(SWEEP_DEFAULTS), required=True)
    sw.add_argument("--sweep-values", help="comma list; default is the standard grid")
    bd = sub.add_parser("boundary", parents=[common], help="decision grids on 2-D data")
    bd.add_argument("--resolution", type=int, default=200)
    pr = sub.add_parser("predict", parents=[common], help="fit and predict single queries")
    pr.add_argument("--query", action="append", help="comma-separated raw feature values")
    pr.add_argument("--queries", help="CSV of raw feature rows (header row skipped)")
    pr.add_argument("--explain", action="store_true", help="print class score tables as JSON")
    pr.add_argument("--model", help="load a saved model instead of fitting")
    pr.add_argument("--save-model", help="write the fitted model to this file")
    sub.add_parser("report", parents=[common], help="comparison tables from a benchmark run")
    return parser


def config_from_args(args) -> RunConfig:
    datasets = _split(args.datasets)
    if args.all:
        datasets = list(DESK_SCALE) + [d for d in datasets if d not in DESK_SCALE]
    if not datasets:
        datasets = {"boundary": ["moons"], "predict": []}.get(args.command, list(DESK_SCALE[:3]))
    methods = _split(args.methods)
    if not methods:
        methods = ["dwknn"] if args.command == "sweep" else list(ev.METHODS)
    unknown = [m for m in methods if m not in ev.METHODS]
    if unknown:
        raise UsageError(f"unknown methods {unknown}; expected {', '.join(ev.METHODS)}")
    try:
        dw = DwknnConfig(k=args.k, k_v=args.kv, gamma=args.gamma, pooling=args.pooling,
                         metric=Metric(args.metric, args.minkowski_p), seed=args.seed)
    except ValueError as e:
        raise UsageError(str(e)) from None
    axis = getattr(args, "sweep_axis", None)
    values = []
    if axis:
        values = [_parse_sweep_value(axis, v) for v in _split(args.sweep_values)]
    return RunConfig(args.command, datasets, methods, args.folds, args.seed, dw, axis, values,
                     Path(args.out), args.global_normalize, args.label_column)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
        if cfg.command == "benchmark":
            return cmd_benchmark(cfg)
        if cfg.command == "sweep":
            return cmd_sweep(cfg)
        if cfg.command == "boundary":
            return cmd_boundary(cfg, args.resolution)
        if cfg.command == "predict":
            return cmd_predict(cfg, args)
        return cmd_report(cfg)
    except (UsageError, DatasetError) as e:
        print(f"dwknn {args.command}: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
