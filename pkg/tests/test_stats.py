from itertools import combinations

import numpy as np
import pandas as pd
import pytest

from src.analysis.stats import REPORT_COLUMNS, stats_service
from src.utils import models
from src.utils.errors import DegenerateInputError, ShapeError


def permutation_u_p(a, b):
    """Two-sided exact p of U by enumerating every relabelling"""
    pooled = list(a) + list(b)
    n_a = len(a)

    def u_of(first):
        rest = [x for i, x in enumerate(pooled) if i not in first]
        return sum((pooled[i] > y) + 0.5 * (pooled[i] == y) for i in first for y in rest)

    observed = u_of(set(range(n_a)))
    dist = np.array([u_of(set(c)) for c in combinations(range(len(pooled)), n_a)])
    p = 2.0 * min(np.mean(dist <= observed), np.mean(dist >= observed))
    return observed, min(1.0, p)


def test_t_test_ind():
    r = stats_service.t_test_ind([1, 2, 3], [4, 5, 6])
    assert r.statistic == pytest.approx(-3.674, abs=1e-3)
    assert r.df == 4
    assert r.p_value == pytest.approx(0.0213, abs=1e-3)
    assert r.test_kind == models.TestKind.T_TEST_IND


def test_shapiro_wilk():
    r = stats_service.shapiro_wilk([1, 2, 4])
    assert r.statistic == pytest.approx(0.9643, abs=1e-3)
    assert r.p_value == pytest.approx(0.637, abs=2e-3)
    with pytest.raises(DegenerateInputError):
        stats_service.shapiro_wilk([1, 2])
    with pytest.raises(DegenerateInputError):
        stats_service.shapiro_wilk([3, 3, 3, 3])


def test_mann_whitney_u_small():
    r = stats_service.mann_whitney_u([1, 2], [3, 4])
    assert r.statistic == 0.0
    assert r.method == "exact"
    assert r.p_value == pytest.approx(1 / 3)


def test_mann_whitney_u_matches_permutation():
    rng = np.random.default_rng(0)
    for _ in range(10):
        n_a, n_b = rng.integers(2, 7, size=2)
        values = rng.permutation(40)[: n_a + n_b].astype(float)
        a, b = values[:n_a], values[n_a:]
        u, p = permutation_u_p(a, b)
        r = stats_service.mann_whitney_u(a, b)
        assert r.statistic == pytest.approx(u)
        assert r.p_value == pytest.approx(p, abs=1e-9)


def test_mann_whitney_u_ties_and_large_samples():
    tied = stats_service.mann_whitney_u([1, 1, 2], [2, 3, 3])
    assert tied.method == "asymptotic"
    flat = stats_service.mann_whitney_u([5, 5], [5, 5, 5])
    assert flat.p_value == 1.0 and flat.statistic == 3.0

    rng = np.random.default_rng(1)
    big = stats_service.mann_whitney_u(rng.normal(0, 1, 30), rng.normal(2, 1, 30))
    assert big.method == "asymptotic"
    assert big.p_value < 1e-4


def test_paired_t_test():
    r = stats_service.paired_t_test([1.0, 2.0, 3.0, 4.0], [1.5, 2.0, 4.0, 5.5])
    assert r.df == 3
    assert r.statistic < 0
    with pytest.raises(ShapeError):
        stats_service.paired_t_test([1, 2], [1, 2, 3])
    with pytest.raises(DegenerateInputError):
        stats_service.paired_t_test([1, 2, 3], [2, 3, 4])


def test_pearson():
    r = stats_service.pearson([1, 2, 3, 4], [1, 3, 2, 4])
    assert r.statistic == pytest.approx(0.8)
    assert r.df == 2
    assert r.p_value == pytest.approx(0.2, abs=1e-9)

    perfect = stats_service.pearson([1, 2, 3], [2, 4, 6])
    assert perfect.statistic == pytest.approx(1.0) and perfect.p_value < 1e-6

    with pytest.raises(DegenerateInputError):
        stats_service.pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(DegenerateInputError):
        stats_service.pearson([1, 2], [1, 2])
    with pytest.raises(ShapeError):
        stats_service.pearson([1, 2, 3], [1, 2])


def test_degenerate_t_test():
    with pytest.raises(DegenerateInputError):
        stats_service.t_test_ind([2, 2, 2], [2, 2])
    with pytest.raises(DegenerateInputError):
        stats_service.t_test_ind([1], [2, 3])
    with pytest.raises(DegenerateInputError):
        stats_service.t_test_ind([1, np.nan], [2, 3])


def test_compare_conditions_picks_the_test():
    normal = stats_service.compare_conditions([1, 2, 3, 4, 5], [2, 3, 4, 5, 6])
    assert normal.test_kind == models.TestKind.T_TEST_IND
    assert normal.method == "normal"

    skewed = stats_service.compare_conditions([1, 1, 1, 1, 100], [2, 3, 4, 5, 6])
    assert skewed.test_kind == models.TestKind.MANN_WHITNEY_U

    tiny = stats_service.compare_conditions([1, 2], [3, 4])
    assert tiny.test_kind == models.TestKind.MANN_WHITNEY_U


def test_report_frame():
    r = stats_service.t_test_ind([1, 2, 3], [4, 5, 6])
    row = stats_service.report_row("hit_rate", "highlight", "no_highlight", r)
    frame = stats_service.report_frame([row])
    assert list(frame.columns) == REPORT_COLUMNS
    assert frame.loc[0, "test"] == "t_test_ind"
    assert isinstance(frame, pd.DataFrame)


def test_u_statistics_are_complementary():
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=7), rng.normal(size=9)
    forward = stats_service.mann_whitney_u(a, b)
    backward = stats_service.mann_whitney_u(b, a)
    assert forward.statistic + backward.statistic == pytest.approx(7 * 9)
    assert forward.p_value == pytest.approx(backward.p_value)


def test_mann_whitney_u_every_rank_split_of_four_and_four():
    ranks = np.arange(1.0, 9.0)
    for first in combinations(range(8), 4):
        a = ranks[list(first)]
        b = np.delete(ranks, list(first))
        u, p = permutation_u_p(a, b)
        r = stats_service.mann_whitney_u(a, b)
        assert r.method == "exact"
        assert r.statistic == pytest.approx(u)
        assert r.p_value == pytest.approx(p, abs=1e-9)


def test_pearson_of_independent_samples_is_small():
    rng = np.random.default_rng(17)
    r = stats_service.pearson(rng.normal(size=1000), rng.normal(size=1000))
    assert abs(r.statistic) < 0.08
    assert r.df == 998
