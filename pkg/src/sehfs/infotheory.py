"""Discrete entropies, mutual information and the feature MI graph.

All quantities are in bits and use plug-in (empirical) probabilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import _kernels

MI_NEGATIVE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class DiscretizedMatrix:
    """Integer codes (n x d); column ``j`` uses codes ``0..bins[j]-1``."""

    codes: np.ndarray
    bins: np.ndarray

    @property
    def shape(self):
        return self.codes.shape


@dataclass(frozen=True)
class FeatureGraph:
    """Symmetric non-negative feature adjacency (pairwise MI)."""

    adjacency: np.ndarray
    diagonal_policy: str = "zero"

    @property
    def d(self) -> int:
        return self.adjacency.shape[0]


def default_bins(n: int) -> int:
    return max(2, min(10, math.ceil(math.sqrt(n))))


def _compact(codes: np.ndarray) -> tuple[np.ndarray, int]:
    uniq, inv = np.unique(codes, return_inverse=True)
    return inv.reshape(codes.shape).astype(np.int64), len(uniq)


def discretize(X, bins: int | None = None, strategy: str = "equal_frequency") -> DiscretizedMatrix:
    """Bin every column of ``X`` independently.

    ``equal_width`` splits [min, max] into ``bins`` equal intervals.
    ``equal_frequency`` cuts at interior quantiles; duplicate cut points are
    merged and values equal to a cut fall in the lower bin.  Codes are then
    relabelled to be contiguous, so ``bins[j]`` is the effective bin count
    (1 for a constant column).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n, d = X.shape
    if n < 1:
        raise ValueError("need at least one sample")
    if bins is None:
        bins = default_bins(n)
    if bins < 2:
        raise ValueError("bins must be >= 2")
    codes = np.zeros((n, d), dtype=np.int64)
    eff = np.ones(d, dtype=np.int64)
    for j in range(d):
        col = X[:, j]
        lo, hi = col.min(), col.max()
        if hi == lo:
            continue
        if strategy == "equal_width":
            raw = np.floor((col - lo) / ((hi - lo) / bins)).astype(np.int64)
            raw = np.clip(raw, 0, bins - 1)
        elif strategy == "equal_frequency":
            cuts = np.unique(np.quantile(col, np.arange(1, bins) / bins))
            raw = np.searchsorted(cuts, col, side="left")
        else:
            raise ValueError(f"unknown strategy {strategy!r}")
        codes[:, j], eff[j] = _compact(raw)
    return DiscretizedMatrix(codes, eff)


def _entropy_of_counts(counts: np.ndarray) -> float:
    # sorted so the sum depends only on the multiset of counts
    counts = np.sort(counts[counts > 0]).astype(np.float64)
    n = counts.sum()
    p = counts / n
    return float(-np.sum(p * np.log2(p)) + 0.0)


def entropy(codes) -> float:
    """Shannon entropy (bits) of the empirical distribution of ``codes``."""
    codes = np.asarray(codes)
    if codes.size == 0:
        raise ValueError("entropy of an empty sample")
    _, counts = np.unique(codes, return_counts=True)
    return _entropy_of_counts(counts)


def _joint_codes(columns: np.ndarray) -> np.ndarray:
    """One integer per row identifying the tuple of values in ``columns`` (n x k)."""
    _, inv = np.unique(columns, axis=0, return_inverse=True)
    return inv.ravel()


def _clamp_mi(value: float) -> float:
    if value < -MI_NEGATIVE_TOLERANCE:
        raise ArithmeticError(f"mutual information {value} is negative beyond round-off")
    return max(value, 0.0)


def mutual_information(a, b) -> float:
    """I(a; b) = H(a) + H(b) - H(a, b) from empirical joint counts."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    h_ab = entropy(_joint_codes(np.column_stack([a, b])))
    return _clamp_mi(entropy(a) + entropy(b) - h_ab)


def mi_matrix(codes: DiscretizedMatrix) -> np.ndarray:
    """Pairwise MI of all code columns with a zero diagonal (kernel-backed)."""
    raw = _kernels.mi_matrix(
        np.ascontiguousarray(codes.codes.T, dtype=np.int64),
        np.ascontiguousarray(codes.bins, dtype=np.int64),
    )
    if raw.size and raw.min() < -MI_NEGATIVE_TOLERANCE:
        raise ArithmeticError(f"mutual information {raw.min()} is negative beyond round-off")
    return np.maximum(raw, 0.0)


def build_feature_graph(
    X,
    bins: int | None = None,
    diagonal_policy: str = "zero",
    strategy: str = "equal_frequency",
) -> FeatureGraph:
    """Feature graph whose edge (i, j) weight is I(x_i; x_j).

    ``X`` may be a real matrix (discretized first) or a ``DiscretizedMatrix``.
    With ``diagonal_policy="self_entropy"`` the diagonal holds H(x_i).
    """
    codes = X if isinstance(X, DiscretizedMatrix) else discretize(X, bins, strategy)
    if codes.shape[1] < 2:
        raise ValueError("feature graph needs at least two features")
    A = mi_matrix(codes)
    if diagonal_policy == "self_entropy":
        np.fill_diagonal(A, [entropy(c) for c in codes.codes.T])
    elif diagonal_policy != "zero":
        raise ValueError(f"unknown diagonal policy {diagonal_policy!r}")
    return FeatureGraph(A, diagonal_policy)


def _check_subset(codes: DiscretizedMatrix, subset) -> list[int]:
    subset = [int(i) for i in subset]
    if not subset:
        raise ValueError("subset must be non-empty")
    return subset


def joint_entropy_exact(codes: DiscretizedMatrix, subset) -> float:
    """Entropy of the empirical joint distribution of the selected columns."""
    subset = _check_subset(codes, subset)
    return entropy(_joint_codes(codes.codes[:, subset]))


def second_order_approx(codes: DiscretizedMatrix, subset) -> float:
    """Sum of marginal entropies minus all pairwise MI terms (can be negative)."""
    subset = _check_subset(codes, subset)
    cols = codes.codes
    total = sum(entropy(cols[:, i]) for i in subset)
    total -= sum(mutual_information(cols[:, i], cols[:, j]) for i, j in combinations(subset, 2))
    return total
