"""Paired significance tests on fold-level scores.

No statistics library is used: the Student t tail comes from a continued
fraction for the regularized incomplete beta function, and the Wilcoxon
null distribution is counted exactly by dynamic programming over ranks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

T_PAIRED = "t_paired"
WILCOXON = "wilcoxon_signed_rank"

EXACT_MAX_M = 12

_BETACF_EPS = 1e-15
_BETACF_TINY = 1e-300
_BETACF_MAXIT = 10_000


@dataclass(frozen=True)
class PairedTestResult:
    statistic: float
    p_value: float
    n: int
    mean_diff: float
    test: str
    degenerate: bool = False
    method: str = ""

    def to_dict(self) -> dict:
        return {
            "test": self.test,
            "statistic": _json_float(self.statistic),
            "p_value": _json_float(self.p_value),
            "n": self.n,
            "mean_diff": self.mean_diff,
            "degenerate": self.degenerate,
            "method": self.method,
        }


def _json_float(x):
    return None if (x is None or not math.isfinite(x)) else x


# --- incomplete beta / t distribution -------------------------------------------


def _betacf(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation of the incomplete-beta continued fraction
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _BETACF_TINY:
        d = _BETACF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _BETACF_MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETACF_TINY:
            d = _BETACF_TINY
        c = 1.0 + aa / c
        if abs(c) < _BETACF_TINY:
            c = _BETACF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETACF_TINY:
            d = _BETACF_TINY
        c = 1.0 + aa / c
        if abs(c) < _BETACF_TINY:
            c = _BETACF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETACF_EPS:
            return h
    raise RuntimeError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if not (a > 0 and b > 0):
        raise ValueError("betainc needs a > 0 and b > 0")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf_two_sided(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with `df` degrees of freedom."""
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return min(1.0, max(0.0, betainc(df / 2.0, 0.5, x)))


def normal_sf_two_sided(z: float) -> float:
    return min(1.0, math.erfc(abs(z) / math.sqrt(2.0)))


# --- paired t-test ------------------------------------------------------------------


def _diffs(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"paired samples need equal lengths, got {a.shape} and {b.shape}")
    return a - b


def paired_t_test(a, b) -> PairedTestResult:
    """Two-sided paired t-test on ``a - b``.

    Zero-variance differences give ``degenerate=True`` and a NaN p-value.
    """
    d = _diffs(a, b)
    n = d.size
    if n < 2:
        raise ValueError("paired t-test needs at least two pairs")
    mean = math.fsum(d) / n
    sd = math.sqrt(math.fsum((d - mean) ** 2) / (n - 1))
    if sd == 0.0 or np.all(d == d[0]):
        return PairedTestResult(math.nan, math.nan, n, mean, T_PAIRED, degenerate=True)
    t = mean / (sd / math.sqrt(n))
    return PairedTestResult(t, t_sf_two_sided(t, n - 1), n, mean, T_PAIRED, method="student_t")


# --- Wilcoxon signed-rank ----------------------------------------------------------


def midranks(x) -> np.ndarray:
    """1-based ranks with tied values sharing the mean of their positions."""
    x = np.asarray(x, dtype=float)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x))
    sx = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def signed_rank_null_counts(ranks) -> dict:
    """Number of sign patterns giving each value of W+ (keyed by 2 * W+).

    Doubling the ranks makes mid-ranks integral, so the count is exact.
    """
    doubled = [int(round(2 * r)) for r in ranks]
    counts = {0: 1}
    for r in doubled:
        nxt = dict(counts)
        for s, c in counts.items():
            nxt[s + r] = nxt.get(s + r, 0) + c
        counts = nxt
    return counts


def wilcoxon_exact_p(ranks, w: float) -> float:
    """Two-sided exact p: share of sign patterns with min(W+, W-) <= w."""
    counts = signed_rank_null_counts(ranks)
    total2 = sum(int(round(2 * r)) for r in ranks)
    w2 = int(round(2 * w))
    hits = sum(c for s, c in counts.items() if min(s, total2 - s) <= w2)
    return hits / 2 ** len(ranks)


def wilcoxon_normal_p(ranks, abs_diffs, w: float) -> float:
    """Normal approximation with tie and continuity corrections."""
    m = len(ranks)
    mean = m * (m + 1) / 4.0
    _, tie_counts = np.unique(np.asarray(abs_diffs), return_counts=True)
    var = m * (m + 1) * (2 * m + 1) / 24.0 - float(np.sum(tie_counts ** 3 - tie_counts)) / 48.0
    if var <= 0:
        return 1.0
    z = (w - mean + 0.5) / math.sqrt(var)
    return normal_sf_two_sided(min(z, 0.0))


def wilcoxon_signed_rank(a, b, method: str = "auto") -> PairedTestResult:
    """Two-sided Wilcoxon signed-rank test on ``a - b``.

    Zero differences are dropped. The statistic is ``min(W+, W-)``. With
    ``method="auto"`` the p-value is exact for up to 12 nonzero differences and
    normal-approximated above that.
    """
    if method not in ("auto", "exact", "normal"):
        raise ValueError(f"unknown method {method!r}")
    d = _diffs(a, b)
    n = d.size
    mean_diff = math.fsum(d) / n if n else math.nan
    d = d[d != 0]
    m = d.size
    if m == 0:
        return PairedTestResult(math.nan, math.nan, n, mean_diff, WILCOXON, degenerate=True)
    absd = np.abs(d)
    ranks = midranks(absd)
    w_plus = math.fsum(ranks[d > 0])
    w_minus = math.fsum(ranks[d < 0])
    w = min(w_plus, w_minus)
    if method == "exact" or (method == "auto" and m <= EXACT_MAX_M):
        return PairedTestResult(w, wilcoxon_exact_p(ranks, w), n, mean_diff, WILCOXON,
                                method="exact")
    return PairedTestResult(w, wilcoxon_normal_p(ranks, absd, w), n, mean_diff, WILCOXON,
                            method="normal")


def sign_test_p(wins: int, losses: int) -> float:
    """One-sided sign test: P(X >= wins) for X ~ Binomial(wins + losses, 1/2)."""
    n = wins + losses
    if n == 0:
        return 1.0
    return sum(math.comb(n, j) for j in range(wins, n + 1)) / 2 ** n
