"""Small statistical helpers shared by the labs."""

from typing import List, Sequence, Tuple

import numpy as np
from scipy import stats

from shared.models.base import FrozenModel


class HypothesisResult(FrozenModel):
    statistic: float
    p_value: float
    dof: int = 0
    samples: Tuple[int, int] = (0, 0)


def mean_and_se(values: Sequence[float]) -> Tuple[float, float]:
    """Sample mean and its standard error (sample std / sqrt(count))."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return float("nan"), float("nan")
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / np.sqrt(arr.size))


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> Tuple[float, float]:
    """Two-sided Wilson score interval for a binomial proportion."""
    if trials == 0:
        return 0.0, 1.0
    ci = stats.binomtest(int(successes), int(trials)).proportion_ci(
        confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def _pool_columns(table: np.ndarray, weight_row: int, threshold: float) -> np.ndarray:
    """Merge adjacent columns until each reaches ``threshold`` in ``weight_row``.

    ``weight_row`` = -1 means the column total is used.
    """
    pooled: List[np.ndarray] = []
    acc = np.zeros(table.shape[0])
    for col in table.T:
        acc = acc + col
        weight = acc.sum() if weight_row < 0 else acc[weight_row]
        if weight >= threshold:
            pooled.append(acc)
            acc = np.zeros(table.shape[0])
    if acc.sum() > 0:
        if pooled:
            pooled[-1] = pooled[-1] + acc
        else:
            pooled.append(acc)
    if not pooled:
        return np.zeros((table.shape[0], 0))
    return np.column_stack(pooled)


def chi2_two_sample(a: Sequence[int], b: Sequence[int], min_count: float = 10.0) -> HypothesisResult:
    """Chi-square homogeneity test between two samples of a discrete variable.

    Sparse categories are merged with their neighbours; a single remaining
    category means the samples are indistinguishable (p = 1).
    """
    a = np.asarray(a)
    b = np.asarray(b)
    support = np.union1d(a, b)
    table = np.vstack([
        np.bincount(np.searchsorted(support, a), minlength=support.size),
        np.bincount(np.searchsorted(support, b), minlength=support.size),
    ]).astype(float)
    table = _pool_columns(table, -1, min_count)
    if table.shape[1] < 2:
        return HypothesisResult(statistic=0.0, p_value=1.0, samples=(a.size, b.size))
    stat, p, dof, _ = stats.chi2_contingency(table, correction=False)
    return HypothesisResult(statistic=float(stat), p_value=float(p), dof=int(dof),
                            samples=(a.size, b.size))


def chi2_goodness_of_fit(observed: Sequence[int], expected_probs: Sequence[float],
                         min_expected: float = 5.0) -> HypothesisResult:
    """Chi-square goodness of fit of category counts against exact probabilities."""
    obs = np.asarray(observed, dtype=float)
    probs = np.asarray(expected_probs, dtype=float)
    total = obs.sum()
    table = _pool_columns(np.vstack([obs, probs / probs.sum() * total]), 1, min_expected)
    if table.shape[1] < 2:
        return HypothesisResult(statistic=0.0, p_value=1.0, samples=(int(total), 0))
    stat, p = stats.chisquare(table[0], table[1])
    return HypothesisResult(statistic=float(stat), p_value=float(p), dof=table.shape[1] - 1,
                            samples=(int(total), 0))


def ks_two_sample(a: Sequence[float], b: Sequence[float]) -> HypothesisResult:
    result = stats.ks_2samp(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    return HypothesisResult(statistic=float(result.statistic), p_value=float(result.pvalue),
                            samples=(len(a), len(b)))


def ratio_spread(values: Sequence[float]) -> float:
    """max/min - 1 over positive values; 0 for an empty or all-zero list."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0 or np.all(arr == 0):
        return 0.0
    return float(arr.max() / arr.min() - 1.0)
