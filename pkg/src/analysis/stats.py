"""
Hypothesis tests for condition comparisons and correlations
"""
import logging
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from src.utils.errors import DegenerateInputError, ShapeError
from src.utils.models import TestKind, TestResult

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["metric", "condition_a", "condition_b", "test", "statistic", "df", "p"]

# Largest combined sample size for the exact U distribution
EXACT_U_MAX_N = 20


def _sample(x: Sequence[float], name: str = "sample") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64).ravel()
    if not np.all(np.isfinite(arr)):
        raise DegenerateInputError(f"{name} contains non-finite values")
    return arr


def _clip_p(p: float) -> float:
    return float(min(1.0, max(0.0, p)))


class StatsService:
    """Two-tailed tests reported as TestResult"""

    def shapiro_wilk(self, sample: Sequence[float]) -> TestResult:
        """
        Shapiro-Wilk normality test (Royston's AS R94 algorithm)

        Args:
            sample: 3 to 5000 values, not all identical

        Returns:
            TestResult with W and its p-value
        """
        x = _sample(sample)
        if not 3 <= x.size <= 5000:
            raise DegenerateInputError(f"Shapiro-Wilk needs 3 <= n <= 5000, got n={x.size}")
        if np.ptp(x) == 0:
            raise DegenerateInputError("Shapiro-Wilk is undefined for an all-identical sample")
        w, p = stats.shapiro(x)
        return TestResult(statistic=float(w), p_value=_clip_p(p), test_kind=TestKind.SHAPIRO_WILK, n_a=x.size)

    def t_test_ind(self, a: Sequence[float], b: Sequence[float]) -> TestResult:
        """Pooled-variance two-sample t-test, df = n_a + n_b - 2"""
        a, b = _sample(a, "a"), _sample(b, "b")
        if a.size < 2 or b.size < 2:
            raise DegenerateInputError(f"t-test needs n >= 2 per sample, got {a.size} and {b.size}")
        pooled = ((a.size - 1) * a.var(ddof=1) + (b.size - 1) * b.var(ddof=1)) / (a.size + b.size - 2)
        if pooled <= 0:
            raise DegenerateInputError("t-test is undefined for zero pooled variance")
        res = stats.ttest_ind(a, b, equal_var=True)
        return TestResult(
            statistic=float(res.statistic),
            df=float(a.size + b.size - 2),
            p_value=_clip_p(res.pvalue),
            test_kind=TestKind.T_TEST_IND,
            n_a=a.size,
            n_b=b.size,
        )

    def paired_t_test(self, a: Sequence[float], b: Sequence[float]) -> TestResult:
        """t-test on the differences a - b, df = n - 1"""
        a, b = _sample(a, "a"), _sample(b, "b")
        if a.size != b.size:
            raise ShapeError(f"Paired samples differ in length: {a.size} vs {b.size}")
        if a.size < 2:
            raise DegenerateInputError(f"Paired t-test needs n >= 2, got {a.size}")
        d = a - b
        if np.ptp(d) == 0:
            raise DegenerateInputError("Paired t-test is undefined when all differences are identical")
        res = stats.ttest_rel(a, b)
        return TestResult(
            statistic=float(res.statistic),
            df=float(a.size - 1),
            p_value=_clip_p(res.pvalue),
            test_kind=TestKind.PAIRED_T_TEST,
            n_a=a.size,
            n_b=b.size,
        )

    def mann_whitney_u(self, a: Sequence[float], b: Sequence[float]) -> TestResult:
        """
        Mann-Whitney U (Wilcoxon rank-sum) test

        U is the statistic of the first sample with midranks for ties. The
        p-value is exact for tie-free samples of combined size <= 20 and
        otherwise uses the tie-corrected normal approximation with
        continuity correction.
        """
        a, b = _sample(a, "a"), _sample(b, "b")
        if a.size < 1 or b.size < 1:
            raise DegenerateInputError("Mann-Whitney U needs at least one value per sample")
        pooled = np.concatenate([a, b])
        ties = np.unique(pooled).size < pooled.size
        method = "exact" if pooled.size <= EXACT_U_MAX_N and not ties else "asymptotic"

        if method == "asymptotic" and np.ptp(pooled) == 0:
            # every value tied: U sits at its mean
            return TestResult(statistic=a.size * b.size / 2.0, p_value=1.0, test_kind=TestKind.MANN_WHITNEY_U,
                              n_a=a.size, n_b=b.size, method=method)

        res = stats.mannwhitneyu(a, b, alternative="two-sided", method=method, use_continuity=True)
        return TestResult(
            statistic=float(res.statistic),
            p_value=_clip_p(res.pvalue),
            test_kind=TestKind.MANN_WHITNEY_U,
            n_a=a.size,
            n_b=b.size,
            method=method,
        )

    def pearson(self, a: Sequence[float], b: Sequence[float]) -> TestResult:
        """Pearson r with a two-tailed p from t = r sqrt((n-2)/(1-r^2)), df = n - 2"""
        a, b = _sample(a, "a"), _sample(b, "b")
        if a.size != b.size:
            raise ShapeError(f"Samples differ in length: {a.size} vs {b.size}")
        if a.size < 3:
            raise DegenerateInputError(f"Pearson correlation needs n >= 3, got {a.size}")
        if np.ptp(a) == 0 or np.ptp(b) == 0:
            raise DegenerateInputError("Pearson correlation is undefined for a zero-variance sample")

        r = float(np.clip(stats.pearsonr(a, b).statistic, -1.0, 1.0))
        df = a.size - 2
        if abs(r) >= 1.0:
            p = 0.0
        else:
            t = r * np.sqrt(df / (1.0 - r * r))
            p = 2.0 * stats.t.sf(abs(t), df)
        return TestResult(statistic=r, df=float(df), p_value=_clip_p(p), test_kind=TestKind.PEARSON,
                          n_a=a.size, n_b=b.size)

    def compare_conditions(self, a: Sequence[float], b: Sequence[float], alpha: float = 0.05) -> TestResult:
        """
        Shapiro-Wilk on both samples, then a t-test if both look normal
        (p >= alpha) and a Mann-Whitney U test otherwise
        """
        a, b = _sample(a, "a"), _sample(b, "b")
        normal = True
        for x in (a, b):
            try:
                normal = normal and self.shapiro_wilk(x).p_value >= alpha
            except DegenerateInputError as e:
                logger.debug("Normality check skipped: %s", e)
                normal = False
        if normal:
            try:
                return self.t_test_ind(a, b).model_copy(update={"method": "normal"})
            except DegenerateInputError as e:
                logger.debug("t-test unavailable: %s", e)
        return self.mann_whitney_u(a, b)

    @staticmethod
    def report_row(metric: str, condition_a: str, condition_b: str, result: TestResult) -> dict:
        return {
            "metric": metric,
            "condition_a": condition_a,
            "condition_b": condition_b,
            "test": result.test_kind.value,
            "statistic": result.statistic,
            "df": result.df,
            "p": result.p_value,
        }

    @staticmethod
    def report_frame(rows: List[dict]) -> pd.DataFrame:
        """Stats report table: metric,condition_a,condition_b,test,statistic,df,p"""
        return pd.DataFrame(rows, columns=REPORT_COLUMNS)


# Global stats service instance
stats_service = StatsService()
