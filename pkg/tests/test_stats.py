import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import rankdata

from retrainsim.exceptions import InsufficientDataError, SchemaError
from retrainsim.stats import iqr, median_difference, wilcoxon_signed_rank


def enumerate_wilcoxon(diff):
    """Oracle: try every sign assignment of the non-zero |differences|."""
    d = np.asarray(diff, dtype=float)
    d = d[d != 0]
    ranks = rankdata(np.abs(d))
    w_plus = ranks[d > 0].sum()
    total = ranks.sum()
    extreme = 0
    for signs in itertools.product((0, 1), repeat=d.size):
        s = sum(r for r, keep in zip(ranks, signs) if keep)
        if abs(2 * s - total) >= abs(2 * w_plus - total) - 1e-9:
            extreme += 1
    return min(w_plus, total - w_plus), min(1.0, extreme / 2 ** d.size)


def test_all_positive_five():
    w, p = wilcoxon_signed_rank([1, 2, 3, 4, 5], [0] * 5)
    assert w == 0.0 and p == 0.0625


def test_alternating_six():
    diff = [-1, 2, -3, 4, -5, 6]
    assert tuple(wilcoxon_signed_rank(diff, [0] * 6)) == enumerate_wilcoxon(diff)


def test_identical_samples():
    with pytest.raises(InsufficientDataError):
        wilcoxon_signed_rank([1, 2, 3, 4, 5], [1, 2, 3, 4, 5])


def test_zeros_dropped():
    r = wilcoxon_signed_rank([1, 2, 3, 4, 5, 7, 7], [0, 0, 0, 0, 0, 7, 7])
    assert r.n == 5 and r.p_value == 0.0625


def test_shape_mismatch():
    with pytest.raises(SchemaError):
        wilcoxon_signed_rank([1, 2, 3], [1, 2])


@given(st.lists(st.integers(-4, 4), min_size=5, max_size=12))
@settings(max_examples=150, deadline=None)
def test_exact_matches_enumeration(diff):
    if np.count_nonzero(diff) < 5:
        return
    r = wilcoxon_signed_rank(diff, [0] * len(diff))
    assert r.exact
    assert tuple(r) == enumerate_wilcoxon(diff)


@given(st.lists(st.integers(-6, 6), min_size=5, max_size=30))
@settings(max_examples=100, deadline=None)
def test_swap_symmetry(diff):
    if np.count_nonzero(diff) < 5:
        return
    zeros = [0] * len(diff)
    assert tuple(wilcoxon_signed_rank(diff, zeros)) == tuple(wilcoxon_signed_rank(zeros, diff))


def test_normal_approximation_near_scipy():
    from scipy.stats import wilcoxon

    rng = np.random.default_rng(3)
    a, b = rng.normal(size=30), rng.normal(0.4, size=30)
    ours = wilcoxon_signed_rank(a, b)
    ref = wilcoxon(a, b, method="approx", correction=True)
    assert not ours.exact
    assert ours.statistic == ref.statistic
    assert ours.p_value == pytest.approx(ref.pvalue, rel=1e-9)


def test_helpers():
    assert median_difference([3, 5, 9], [1, 1, 1]) == 4.0
    assert iqr([1, 2, 3, 4, 5]) == 2.0
