"""Thin wrappers over scipy.stats used by the scenario summaries and tests."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as _st


@dataclass(frozen=True)
class StatResult:
    statistic: float
    pvalue: float
    dof: int | None = None

    def passes(self, significance: float = 1e-3) -> bool:
        return self.pvalue >= significance


def binomial_sigma(p: float, n: int) -> float:
    return math.sqrt(p * (1.0 - p) / n)


def within_sigma(observed: float, expected: float, n: int, k: float = 3.0) -> bool:
    """``|observed - expected| <= k sigma`` for a binomial frequency over ``n`` trials."""
    return abs(observed - expected) <= k * binomial_sigma(expected, n)


def chi2_goodness(counts, expected_probs) -> StatResult:
    """Chi-square test of observed counts against expected probabilities (zero cells dropped)."""
    counts = np.asarray(counts, dtype=float)
    probs = np.asarray(expected_probs, dtype=float)
    keep = probs > 0
    if np.any(counts[~keep] > 0):
        return StatResult(math.inf, 0.0, int(keep.sum()) - 1)
    exp = probs[keep] / probs[keep].sum() * counts.sum()
    if keep.sum() < 2:
        return StatResult(0.0, 1.0, 0)
    res = _st.chisquare(counts[keep], exp)
    return StatResult(float(res.statistic), float(res.pvalue), int(keep.sum()) - 1)


def chi2_homogeneity(*count_rows) -> StatResult:
    """Chi-square test that several count vectors share one distribution.

    Columns empty in every row are dropped; a single remaining column means
    the samples are trivially identical.
    """
    table = np.array(count_rows, dtype=float)
    table = table[:, table.sum(axis=0) > 0]
    if table.shape[1] < 2:
        return StatResult(0.0, 1.0, 0)
    res = _st.chi2_contingency(table, correction=False)
    return StatResult(float(res.statistic), float(res.pvalue), int(res.dof))


def ks_test(samples, cdf) -> StatResult:
    res = _st.kstest(np.asarray(samples, dtype=float), cdf)
    return StatResult(float(res.statistic), float(res.pvalue))


def ks_exponential(samples, rate: float) -> StatResult:
    return ks_test(samples, _st.expon(scale=1.0 / rate).cdf)
