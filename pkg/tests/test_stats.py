from __future__ import annotations

import itertools

import numpy as np
import pytest
from scipy import stats

from mdanlab.errors import InputError
from mdanlab.eval.stats import EXACT_MAX_N, rank_sources, wilcoxon_signed_rank


def _enumeration_oracle(a, b) -> tuple[float, float]:
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    d = d[d != 0]
    ranks = stats.rankdata(np.abs(d))
    w_plus = ranks[d > 0].sum()
    w_minus = ranks[d < 0].sum()
    center = ranks.sum() / 2
    hits = 0
    total = 0
    for signs in itertools.product((0, 1), repeat=d.size):
        w = sum(r for r, s in zip(ranks, signs) if s)
        hits += abs(w - center) >= abs(w_plus - center) - 1e-9
        total += 1
    return min(w_plus, w_minus), hits / total


def test_rank_sources():
    assert rank_sources([0.5, 0.5, 0.5]) == [0, 1, 2]
    assert rank_sources([0.9, 0.5, 0.1]) == [2, 1, 0]
    assert rank_sources([0.4, 0.1, 0.9]) == [1, 0, 2]
    with pytest.raises(InputError):
        rank_sources([])


@pytest.mark.parametrize(
    "a,b",
    [
        ([0.81, 0.77, 0.90, 0.68, 0.74, 0.88], [0.79, 0.70, 0.85, 0.69, 0.71, 0.80]),
        ([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0], [1.5, 1.0, 3.5, 2.0, 5.5, 4.0, 7.5, 6.0]),
        ([0.1, 0.2, 0.3, 0.4], [0.2, 0.1, 0.3, 0.2]),
        ([3.0, 1.0, 2.0, 5.0, 4.0], [1.0, 3.0, 0.0, 3.0, 6.0]),
    ],
)
def test_exact_p_matches_enumeration(a, b):
    statistic, p = wilcoxon_signed_rank(a, b)
    expected_stat, expected_p = _enumeration_oracle(a, b)
    assert statistic == pytest.approx(expected_stat)
    assert p == pytest.approx(expected_p, abs=1e-10)


def test_swap_symmetry_and_identical_samples():
    rng = np.random.default_rng(0)
    for n in (5, 12, 20):
        a = rng.normal(size=n)
        b = a + rng.normal(scale=0.5, size=n)
        assert wilcoxon_signed_rank(a, b) == wilcoxon_signed_rank(b, a)
    assert wilcoxon_signed_rank([0.3, 0.4], [0.3, 0.4]) == (0.0, 1.0)


def test_p_range_and_extremes():
    a = np.arange(1.0, 13.0)
    statistic, p = wilcoxon_signed_rank(a, np.zeros(12))
    assert statistic == 0.0
    assert p == pytest.approx(2 / 2**12)
    _, p = wilcoxon_signed_rank(np.arange(1.0, 41.0), np.zeros(40))
    assert 0.0 < p < 1e-6


def test_agrees_with_scipy():
    rng = np.random.default_rng(3)
    for n in (6, 9, 25, 40):
        a = rng.normal(size=n)
        b = a + rng.normal(loc=0.2, size=n)
        statistic, p = wilcoxon_signed_rank(a, b)
        ref = stats.wilcoxon(a, b, correction=True, method="exact" if n <= EXACT_MAX_N else "approx")
        assert statistic == pytest.approx(ref.statistic)
        assert p == pytest.approx(ref.pvalue, abs=1e-6 if n <= EXACT_MAX_N else 0.01)


def test_exact_and_normal_branches_agree_at_boundary():
    rng = np.random.default_rng(7)
    for _ in range(10):
        a = rng.normal(size=EXACT_MAX_N)
        b = a + rng.normal(loc=0.3, size=EXACT_MAX_N)
        _, exact = wilcoxon_signed_rank(a, b)
        _, approx = wilcoxon_signed_rank(np.append(a, 0.0), np.append(b, 0.0))  # 零差值被剔除，仍走精确分支
        assert exact == approx
        ranks = stats.rankdata(np.abs(a - b))
        w_plus = ranks[(a - b) > 0].sum()
        var = EXACT_MAX_N * (EXACT_MAX_N + 1) * (2 * EXACT_MAX_N + 1) / 24
        z = max(abs(w_plus - EXACT_MAX_N * (EXACT_MAX_N + 1) / 4) - 0.5, 0) / np.sqrt(var)
        assert abs(exact - 2 * stats.norm.sf(z)) < 0.02


def test_input_errors():
    with pytest.raises(InputError):
        wilcoxon_signed_rank([1.0, 2.0], [1.0])
    with pytest.raises(InputError):
        wilcoxon_signed_rank([], [])
