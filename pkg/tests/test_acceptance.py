"""Acceptance checks.

Each test prints one ``PASS``/``FAIL`` line with the measured values and then
asserts.  The lines are also collected and repeated in the pytest terminal
summary (see conftest.py), and ``python tests/test_acceptance.py`` runs the
checks standalone.
"""

import math
import subprocess
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from dwknn.classifier import predict_batch
from dwknn.dataset import (
    apply_zscore,
    fit_zscore,
    generate_synthetic,
    load_bundled,
    preset,
)
from dwknn.evaluation import METHODS, decision_grid, run_cv
from dwknn.model import DwknnConfig, fit
from dwknn.stats import paired_t_test, sign_test_p, wilcoxon_signed_rank

ROOT = Path(__file__).resolve().parent.parent
CV_SEED = 42
REAL = ("iris", "wine", "breast_cancer")
GAMMA_GRID = (0.1, 0.3, 0.5, 0.7, 1.0, 1.5, 2.0, 3.0, 5.0, 10.0)
KV_GRID = (5, 7, 10, 15, 20)  # standard K_v grid restricted to [5, 20]

RESULTS: list = []


def report(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} | {detail}"
    RESULTS.append(line)
    print(line)


def _mean(ds, method="dwknn", seed=CV_SEED, **cfg):
    return run_cv(ds, method, seed=seed, cfg=DwknnConfig(**cfg)).scores.mean


@pytest.fixture(scope="module")
def real():
    return {name: load_bundled(name) for name in REAL}


def test_criterion_01_real_dataset_accuracy(real):
    targets = {"iris": 0.953, "wine": 0.950, "breast_cancer": 0.960}
    t0 = time.perf_counter()
    got = {name: _mean(real[name]) for name in REAL}
    elapsed = time.perf_counter() - t0
    ok = all(abs(got[n] - targets[n]) <= 0.03 for n in REAL) and elapsed < 60
    detail = ", ".join(f"{n} {got[n]:.4f} (target {targets[n]:.3f}±0.03)" for n in REAL)
    report(1, "DW-KNN accuracy on real datasets", ok, f"{detail}; {elapsed:.1f}s")
    assert ok


def test_criterion_02_baseline_parity(real):
    uni = _mean(real["iris"], "uniform")
    dist = _mean(real["breast_cancer"], "distance")
    ok = abs(uni - 0.960) <= 0.03 and abs(dist - 0.965) <= 0.02
    report(2, "baseline parity", ok,
           f"uniform iris {uni:.4f} (0.960±0.03), distance breast_cancer {dist:.4f} (0.965±0.02)")
    assert ok


def test_criterion_03_label_noise_ordering():
    dw, uni = [], []
    for seed in range(10):
        ds = generate_synthetic(replace(preset("syn_overlap", seed), label_noise=0.1),
                                name="syn_overlap_noisy")
        dw.append(_mean(ds, "dwknn", seed=seed))
        uni.append(_mean(ds, "uniform", seed=seed))
    wins = sum(a > b for a, b in zip(dw, uni))
    losses = sum(a < b for a, b in zip(dw, uni))
    p = sign_test_p(wins, losses)
    ok = np.mean(dw) >= np.mean(uni) and p < 0.1
    report(3, "noisy-label ordering (10 seeds)", ok,
           f"dwknn {np.mean(dw):.4f} vs uniform {np.mean(uni):.4f}, "
           f"wins/losses {wins}/{losses}, sign-test p {p:.4f} (< 0.1)")
    assert ok


def _sweep_ranges(real, axis, values):
    ranges = {}
    for name in REAL:
        means = [_mean(real[name], **{axis: v}) for v in values]
        ranges[name] = max(means) - min(means)
    return ranges


def test_criterion_04_gamma_insensitivity(real):
    ranges = _sweep_ranges(real, "gamma", GAMMA_GRID)
    ok = all(r < 0.02 for r in ranges.values())
    report(4, "gamma insensitivity", ok,
           ", ".join(f"{n} range {r:.4f}" for n, r in ranges.items()) + " (each < 0.02)")
    assert ok


def test_criterion_05_kv_insensitivity(real):
    ranges = _sweep_ranges(real, "k_v", KV_GRID)
    ok = all(r < 0.01 for r in ranges.values())
    report(5, "K_v insensitivity", ok,
           ", ".join(f"{n} range {r:.4f}" for n, r in ranges.items()) + " (each < 0.01)")
    assert ok


def test_criterion_06_two_dimensional_boundaries():
    moons_acc = []
    for seed in range(5):
        train = generate_synthetic(preset("moons", seed))
        test = generate_synthetic(replace(preset("moons", seed + 1000), n_samples=1000))
        p = fit_zscore(train)
        model = fit(apply_zscore(train, p), DwknnConfig(), norm=None)
        pred = predict_batch(model, model.norm.transform(p.transform(test.features)))
        moons_acc.append(float(np.mean(pred == test.labels)))
    moons_ok = min(moons_acc) >= 0.95

    blobs = generate_synthetic(preset("blobs_2d_imbalanced", 0))
    cv = {m: _mean(blobs, m) for m in METHODS}
    cv_ok = all(v == 1.0 for v in cv.values())
    grids = {m: decision_grid(blobs, m)[2] for m in METHODS}
    differing = {m: int(np.sum(grids[m] != grids["dwknn"])) for m in METHODS if m != "dwknn"}
    grid_ok = all(v == 0 for v in differing.values())

    ok = moons_ok and cv_ok and grid_ok
    report(6, "2-D boundaries", ok,
           f"moons held-out min {min(moons_acc):.4f} (>= 0.95) {'ok' if moons_ok else 'low'}; "
           f"blobs cv all 1.0: {cv_ok}; grid cells differing from dwknn "
           + ", ".join(f"{m} {n}" for m, n in differing.items()) + " (all 0 required)")
    assert ok


def test_criterion_07_imbalanced_tradeoff():
    prec_hits = rec_hits = 0
    for seed in range(10):
        ds = generate_synthetic(preset("syn_imbalanced", seed))
        minority = int(np.argmin(np.bincount(ds.labels)))
        dw = run_cv(ds, "dwknn", seed=seed).per_class
        uni = run_cv(ds, "uniform", seed=seed).per_class
        prec_hits += dw.precision[minority] >= uni.precision[minority]
        rec_hits += dw.recall[minority] <= uni.recall[minority]
    ok = prec_hits >= 7 and rec_hits >= 7
    report(7, "imbalanced precision/recall direction", ok,
           f"precision dwknn >= uniform on {prec_hits}/10, recall dwknn <= uniform on "
           f"{rec_hits}/10 (each >= 7)")
    assert ok


def _brute_wilcoxon_p(d):
    from itertools import product
    d = [x for x in d if x != 0]
    absd = np.abs(d)
    ranks = [float(np.sum(absd < a) + (np.sum(absd == a) + 1) / 2) for a in absd]
    obs = min(sum(r for r, x in zip(ranks, d) if x > 0), sum(r for r, x in zip(ranks, d) if x < 0))
    hits = 0
    for signs in product((1, -1), repeat=len(d)):
        wp = sum(r for r, s in zip(ranks, signs) if s > 0)
        hits += min(wp, sum(ranks) - wp) <= obs + 1e-9
    return hits / 2 ** len(d)


def test_criterion_08_statistics_oracles():
    checks = []
    t = paired_t_test([1, 2, 3, 4, 5], [0, 0, 0, 0, 0])
    checks.append(("t diffs 1..5", abs(t.p_value - 0.0132) < 1e-4 and abs(t.statistic - 4.2426) < 1e-4))
    checks.append(("t a=b degenerate", paired_t_test([1, 2], [1, 2]).degenerate))
    for label, a, expected_w, expected_p in (
        ("wilcoxon {1,2,3}", [1, 2, 3], 0.0, 0.25),
        ("wilcoxon one pair", [0.4], 0.0, 1.0),
        ("wilcoxon {+1,-1}", [1, -1], 1.5, 1.0),
    ):
        r = wilcoxon_signed_rank(a, [0] * len(a))
        checks.append((label, r.statistic == expected_w and abs(r.p_value - expected_p) < 1e-4))
    rng = np.random.default_rng(0)
    mismatches = 0
    for m in range(1, 9):
        for _ in range(20):
            d = rng.integers(-3, 4, size=m).astype(float)
            if not d.any():
                continue
            if abs(wilcoxon_signed_rank(d, np.zeros(m)).p_value - _brute_wilcoxon_p(list(d))) > 1e-12:
                mismatches += 1
    checks.append(("exact vs brute force m<=8", mismatches == 0))
    ok = all(c for _, c in checks)
    report(8, "statistics oracles", ok, ", ".join(f"{n} {'ok' if c else 'FAIL'}" for n, c in checks))
    assert ok


INVARIANT_TESTS = [
    "tests/test_classifier.py::TestInvariants::test_equal_validity_reduces_to_nearest_pooled_class",
    "tests/test_classifier.py::TestInvariants::test_large_gamma_limit",
    "tests/test_classifier.py::TestInvariants::test_fallback_equals_uniform_vote",
    "tests/test_neighbors.py::test_oracle_equivalence_200_instances",
    "tests/test_dataset.py::TestStratifiedSplit::test_partition_and_bound",
    "tests/test_dataset.py::TestZscore::test_round_trip",
]


def test_criterion_09_invariant_suites():
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                           *INVARIANT_TESTS], cwd=ROOT, capture_output=True, text=True)
    elapsed = time.perf_counter() - t0
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    ok = proc.returncode == 0 and elapsed < 120
    report(9, "invariant suites", ok, f"{summary}; {elapsed:.1f}s (< 120s)")
    assert ok


def test_criterion_10_cli_determinism(tmp_path):
    from dwknn.cli import main

    commands = {
        "benchmark": (["benchmark", "--datasets", "iris,syn_imbalanced"],
                      ["results.csv", "comparison.csv", "perclass.csv"]),
        "sweep": (["sweep", "--datasets", "wine", "--sweep-axis", "k_v"], ["sweep.csv"]),
        "boundary": (["boundary", "--datasets", "moons", "--methods", "dwknn,uniform",
                      "--resolution", "60"], ["boundary.csv", "boundary_train.csv"]),
    }
    identical = {}
    for name, (argv, files) in commands.items():
        outs = []
        for run in ("a", "b"):
            out = tmp_path / f"{name}_{run}"
            assert main(argv + ["--out", str(out)]) == 0
            if name == "benchmark":
                assert main(["report", "--out", str(out)]) == 0
            outs.append([(out / f).read_bytes() for f in files])
        identical[name] = outs[0] == outs[1]
    ok = all(identical.values())
    report(10, "CLI determinism", ok, ", ".join(f"{n} {'identical' if v else 'DIFFERS'}"
                                                for n, v in identical.items()))
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
