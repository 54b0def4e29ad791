"""Paired comparisons across seeds."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .exceptions import InsufficientDataError, SchemaError

EXACT_MAX_N = 12
MIN_NONZERO = 5


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float
    p_value: float
    n: int
    exact: bool

    def __iter__(self):
        return iter((self.statistic, self.p_value))


def _exact_two_sided(doubled_ranks: np.ndarray, doubled_w_plus: int) -> float:
    # counts[s] = number of sign assignments whose doubled positive-rank sum is s
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for r in doubled_ranks:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    s = np.arange(total + 1)
    extreme = np.abs(2 * s - total) >= abs(2 * doubled_w_plus - total)
    return float(counts[extreme].sum()) / float(2 ** doubled_ranks.size)


def wilcoxon_signed_rank(paired_a, paired_b) -> WilcoxonResult:
    """Two-sided Wilcoxon signed-rank test with zero differences dropped.

    Ties among |differences| get average ranks. The null distribution is
    exact for up to 12 non-zero differences; above that a normal
    approximation with tie and continuity corrections is used. The
    statistic is ``min(W+, W-)``.
    """
    a = np.asarray(paired_a, dtype=np.float64)
    b = np.asarray(paired_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise SchemaError("paired samples must be 1-D with equal length")
    diff = a - b
    diff = diff[diff != 0]
    n = diff.size
    if n < MIN_NONZERO:
        raise InsufficientDataError(f"need >= {MIN_NONZERO} non-zero differences, got {n}")
    ranks = rankdata(np.abs(diff), method="average")
    w_plus = float(ranks[diff > 0].sum())
    w_minus = float(ranks[diff < 0].sum())
    stat = min(w_plus, w_minus)
    if n <= EXACT_MAX_N:
        doubled = np.rint(2 * ranks).astype(np.int64)
        p = _exact_two_sided(doubled, int(round(2 * w_plus)))
        return WilcoxonResult(stat, min(1.0, p), n, True)
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(np.abs(diff), return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_counts ** 3 - tie_counts)) / 48.0
    z = max(0.0, abs(w_plus - mean) - 0.5) / math.sqrt(var)
    p = math.erfc(z / math.sqrt(2.0))
    return WilcoxonResult(stat, min(1.0, p), n, False)


def median_difference(paired_a, paired_b) -> float:
    return float(np.median(np.asarray(paired_a, float) - np.asarray(paired_b, float)))


def iqr(values) -> float:
    q75, q25 = np.percentile(np.asarray(values, dtype=np.float64), [75, 25])
    return float(q75 - q25)
