"""ML-kNN classifier, multi-label metrics and cross-validated scoring of feature subsets.

Label rankings order labels by descending score with ties broken by
ascending label index; rank 1 is the top label.  Rank metrics skip samples
that have no positive label (ranking loss also skips samples with no
negative label); the number skipped is reported.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .dataset import MultiViewDataset, make_folds, normalize_features

METRICS = ("ap", "cov", "hl", "rl")
HIGHER_IS_BETTER = {"ap": True, "cov": False, "hl": False, "rl": False}


@dataclass(frozen=True)
class MLkNNModel:
    k: int
    s: float
    X: np.ndarray
    prior: np.ndarray  # P(label present), shape (q,)
    cond_pos: np.ndarray  # P(j neighbours carry l | l present), shape (q, k+1)
    cond_neg: np.ndarray  # P(j neighbours carry l | l absent), shape (q, k+1)
    Y: np.ndarray


def _neighbors(Xq, Xref, k, exclude_self=False):
    D = cdist(Xq, Xref, "sqeuclidean")
    if exclude_self:
        np.fill_diagonal(D, np.inf)
    return np.argsort(D, axis=1, kind="stable")[:, :k]


def mlknn_fit(X_train, Y_train, k: int = 10, s: float = 1.0) -> MLkNNModel:
    X_train = np.asarray(X_train, dtype=np.float64)
    Y_train = np.asarray(Y_train, dtype=np.float64)
    m, q = Y_train.shape
    if not 1 <= k < m:
        raise ValueError(f"k must be in [1, {m - 1}] for {m} training samples, got {k}")
    prior = (s + Y_train.sum(axis=0)) / (2 * s + m)
    nbrs = _neighbors(X_train, X_train, k, exclude_self=True)
    counts = Y_train[nbrs].sum(axis=1).astype(int)  # (m, q)
    c_pos = np.zeros((q, k + 1))
    c_neg = np.zeros((q, k + 1))
    for l in range(q):
        present = Y_train[:, l] == 1
        c_pos[l] = np.bincount(counts[present, l], minlength=k + 1)
        c_neg[l] = np.bincount(counts[~present, l], minlength=k + 1)
    cond_pos = (s + c_pos) / (s * (k + 1) + c_pos.sum(axis=1, keepdims=True))
    cond_neg = (s + c_neg) / (s * (k + 1) + c_neg.sum(axis=1, keepdims=True))
    return MLkNNModel(k, s, X_train, prior, cond_pos, cond_neg, Y_train)


def mlknn_predict(model: MLkNNModel, X_test) -> tuple[np.ndarray, np.ndarray]:
    """Binary MAP predictions and posterior probabilities, both (n_test x q)."""
    X_test = np.asarray(X_test, dtype=np.float64)
    nbrs = _neighbors(X_test, model.X, model.k)
    counts = model.Y[nbrs].sum(axis=1).astype(int)
    labels = np.arange(model.Y.shape[1])
    pos = model.prior * model.cond_pos[labels, counts]
    neg = (1.0 - model.prior) * model.cond_neg[labels, counts]
    scores = pos / (pos + neg)
    return (pos > neg).astype(np.int64), scores


@dataclass
class MetricsReport:
    """Mean (and standard deviation over folds) of the four metrics."""

    ap: float
    cov: float
    hl: float
    rl: float
    ap_std: float = 0.0
    cov_std: float = 0.0
    hl_std: float = 0.0
    rl_std: float = 0.0
    per_fold: dict[str, list[float]] = field(default_factory=dict)
    skipped: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def label_ranks(scores) -> np.ndarray:
    """1-based rank of every label per row (descending score, ties by index)."""
    scores = np.asarray(scores, dtype=np.float64)
    order = np.argsort(-scores, axis=1, kind="stable")
    ranks = np.empty_like(order)
    rows = np.arange(scores.shape[0])[:, None]
    ranks[rows, order] = np.arange(1, scores.shape[1] + 1)
    return ranks


def hamming_loss(predictions, Y_true) -> float:
    P = np.asarray(predictions)
    T = np.asarray(Y_true)
    return float(np.count_nonzero(P != T) / T.size)


def _rank_metrics(scores, Y):
    ranks = label_ranks(scores)
    q = Y.shape[1]
    aps, covs, rls = [], [], []
    skipped = 0
    for r, y in zip(ranks, Y):
        pos = np.sort(r[y == 1])
        if pos.size == 0:
            skipped += 1
            continue
        aps.append(np.mean(np.arange(1, pos.size + 1) / pos))
        covs.append((pos[-1] - 1) / q)
        neg = r[y == 0]
        if neg.size:
            # pairs where the negative is ranked above the positive
            rls.append(np.sum(pos[:, None] > neg[None, :]) / (pos.size * neg.size))
    return aps, covs, rls, skipped


def ranking_loss(scores, Y_true) -> float:
    _, _, rls, _ = _rank_metrics(np.asarray(scores), np.asarray(Y_true))
    return float(np.mean(rls)) if rls else 0.0


def compute_metrics(scores, predictions, Y_true) -> MetricsReport:
    scores = np.asarray(scores, dtype=np.float64)
    predictions = np.asarray(predictions)
    Y = np.asarray(Y_true)
    if not scores.shape == predictions.shape == Y.shape:
        raise ValueError(
            f"shape mismatch: scores {scores.shape}, predictions {predictions.shape}, labels {Y.shape}"
        )
    aps, covs, rls, skipped = _rank_metrics(scores, Y)
    nan = float("nan")
    return MetricsReport(
        ap=float(np.mean(aps)) if aps else nan,
        cov=float(np.mean(covs)) if covs else nan,
        hl=hamming_loss(predictions, Y),
        rl=float(np.mean(rls)) if rls else nan,
        skipped=skipped,
    )


def n_selected(d: int, top_fraction: float) -> int:
    if not 0 < top_fraction <= 1:
        raise ValueError(f"top_fraction must lie in (0, 1], got {top_fraction}")
    # guard against 0.2 * 10 = 2.0000000000000004
    return max(1, math.ceil(top_fraction * d - 1e-9))


def cross_validate(X, Y, folds: int = 10, k: int = 10, seed: int = 0, s: float = 1.0) -> MetricsReport:
    """Fold-wise ML-kNN evaluation of a fixed feature matrix."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y)
    plan = make_folds(X.shape[0], folds, seed)
    per_fold = {m: [] for m in METRICS}
    skipped = 0
    for f in range(folds):
        train, test = plan.split(f)
        model = mlknn_fit(X[train], Y[train], min(k, len(train) - 1), s)
        pred, scores = mlknn_predict(model, X[test])
        rep = compute_metrics(scores, pred, Y[test])
        skipped += rep.skipped
        for m in METRICS:
            per_fold[m].append(getattr(rep, m))
    stats = {}
    for m in METRICS:
        vals = np.asarray(per_fold[m], dtype=np.float64)
        vals = vals[~np.isnan(vals)]
        stats[m] = float(vals.mean()) if vals.size else float("nan")
        stats[f"{m}_std"] = float(vals.std()) if vals.size else float("nan")
    return MetricsReport(**stats, per_fold=per_fold, skipped=skipped)


def evaluate_selection(
    data: MultiViewDataset,
    ranked_features,
    top_fraction: float = 0.2,
    folds: int = 10,
    k: int = 10,
    seed: int = 0,
    normalization: str = "minmax",
) -> MetricsReport:
    """Score the top ``ceil(top_fraction * d)`` ranked features with cross-validated ML-kNN."""
    ranked = np.asarray(ranked_features, dtype=int)
    m = n_selected(data.d, top_fraction)
    chosen = ranked[:m]
    if chosen.size == 0:
        raise ValueError("empty feature selection")
    X = normalize_features(data, normalization).concatenated()[:, chosen]
    return cross_validate(X, data.labels, folds, k, seed)


def format_mean_std(mean: float, std: float, digits: int = 3) -> str:
    """``.686±.052``: fixed decimals with the leading zero dropped."""

    def fmt(x):
        s = f"{x:.{digits}f}"
        if s.startswith("0."):
            return s[1:]
        if s.startswith("-0."):
            return "-" + s[2:]
        return s

    return f"{fmt(mean)}±{fmt(std)}"
