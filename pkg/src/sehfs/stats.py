"""Rank-based comparison of several methods over several datasets."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class FriedmanResult:
    rank_table: np.ndarray  # methods x datasets, 1 = best
    avg_ranks: np.ndarray
    chi2: float
    ff: float
    critical_value: float  # F distribution quantile at the requested level

    @property
    def rejects_null(self) -> bool:
        return self.ff > self.critical_value


def friedman_ranks(scores, higher_is_better: bool = True, alpha: float = 0.05) -> FriedmanResult:
    """Average ranks, Friedman chi-square and the Iman-Davenport F statistic.

    ``scores`` is a (methods x datasets) table.  Tied scores on a dataset get
    mid-ranks.  F_F is reported as ``inf`` when the rankings agree perfectly
    on every dataset (chi-square = N(k - 1)).
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2:
        raise ValueError("scores must be a methods x datasets table")
    k, N = scores.shape
    if k < 2:
        raise ValueError("need >= 2 methods")
    if N < 2:
        raise ValueError("need >= 2 datasets")
    keyed = -scores if higher_is_better else scores
    ranks = np.column_stack([stats.rankdata(keyed[:, j]) for j in range(N)])
    avg = ranks.mean(axis=1)
    chi2 = 12.0 * N / (k * (k + 1)) * (np.sum(avg ** 2) - k * (k + 1) ** 2 / 4.0)
    denom = N * (k - 1) - chi2
    ff = (N - 1) * chi2 / denom if denom > 1e-12 else math.inf
    crit = float(stats.f.ppf(1.0 - alpha, k - 1, (k - 1) * (N - 1)))
    return FriedmanResult(ranks, avg, float(chi2), float(ff), crit)


def bonferroni_dunn_q(k: int, alpha: float = 0.05) -> float:
    """Two-tailed Bonferroni-Dunn critical value for comparing one control to k-1 others."""
    return float(stats.norm.ppf(1.0 - alpha / (2 * (k - 1))))


def bonferroni_dunn_cd(k: int, N: int, q_alpha: float | None = None, alpha: float = 0.05) -> float:
    """Critical difference q_alpha * sqrt(k (k + 1) / (6 N)) between average ranks."""
    if k < 2 or N < 2:
        raise ValueError("need k >= 2 methods and N >= 2 datasets")
    if q_alpha is None:
        q_alpha = bonferroni_dunn_q(k, alpha)
    return q_alpha * math.sqrt(k * (k + 1) / (6.0 * N))
