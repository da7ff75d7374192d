"""Sample-level graphs: per-view kNN Gaussian similarities, the label Laplacian,
and the placement of view blocks inside the global feature space."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform


@dataclass(frozen=True)
class SemanticGraph:
    S: np.ndarray
    sigma: float
    k: int


@dataclass(frozen=True)
class LabelLaplacian:
    S_Y: np.ndarray
    D_Y: np.ndarray
    L_Y: np.ndarray


def semantic_graph(X_v, k: int = 5, sigma="auto") -> SemanticGraph:
    """Symmetric kNN graph with Gaussian weights exp(-||x_i - x_j||^2 / sigma^2).

    Pair (i, j) is kept when either point is among the other's ``k`` nearest
    neighbours (self excluded, distance ties broken by index).  The diagonal
    is 1.  ``sigma="auto"`` uses the mean pairwise Euclidean distance.
    """
    X_v = np.asarray(X_v, dtype=np.float64)
    n = X_v.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"k must be in [1, {n - 1}], got {k}")
    dist = squareform(pdist(X_v))
    if isinstance(sigma, str):
        if sigma != "auto":
            raise ValueError(f"sigma must be positive or 'auto', got {sigma!r}")
        sigma = float(dist[np.triu_indices(n, 1)].mean())
        if sigma <= 0:
            raise ValueError("all samples are identical; cannot pick sigma automatically")
    sigma = float(sigma)
    if sigma <= 0:
        raise ValueError("sigma must be positive")

    ranking = dist.copy()
    np.fill_diagonal(ranking, np.inf)
    nbrs = np.argsort(ranking, axis=1, kind="stable")[:, :k]
    mask = np.zeros((n, n), dtype=bool)
    mask[np.repeat(np.arange(n), k), nbrs.ravel()] = True
    mask |= mask.T
    np.fill_diagonal(mask, True)
    S = np.where(mask, np.exp(-(dist ** 2) / sigma ** 2), 0.0)
    return SemanticGraph(S, sigma, k)


def label_laplacian(Y) -> LabelLaplacian:
    """L_Y = D_Y - S_Y from row-wise cosine similarity of the labels.

    All-zero label rows have zero similarity to every row (themselves included).
    """
    Y = np.asarray(Y, dtype=np.float64)
    norms = np.linalg.norm(Y, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    U = Y / safe[:, None]
    S_Y = U @ U.T
    zero = norms == 0
    S_Y[zero, :] = 0.0
    S_Y[:, zero] = 0.0
    D_Y = np.diag(S_Y.sum(axis=1))
    return LabelLaplacian(S_Y, D_Y, D_Y - S_Y)


@dataclass(frozen=True)
class ViewPlacement:
    """Column block ``[offset, offset + width)`` of a view in the global space.

    Acts as the d(v) x d selection operator P_v without materializing it.
    """

    offset: int
    width: int
    d: int

    @property
    def cols(self) -> slice:
        return slice(self.offset, self.offset + self.width)

    def place(self, M) -> np.ndarray:
        """M P_v: embed an (n x d(v)) matrix at the view's columns of an n x d matrix."""
        M = np.asarray(M)
        if M.ndim != 2 or M.shape[1] != self.width:
            raise ValueError(f"expected {self.width} columns, got shape {M.shape}")
        out = np.zeros((M.shape[0], self.d), dtype=np.result_type(M, np.float64))
        out[:, self.cols] = M
        return out

    def extract(self, M) -> np.ndarray:
        """M P_v^T: the view's column block of an n x d matrix."""
        M = np.asarray(M)
        if M.ndim != 2 or M.shape[1] != self.d:
            raise ValueError(f"expected {self.d} columns, got shape {M.shape}")
        return M[:, self.cols]

    def dense(self) -> np.ndarray:
        """Explicit P_v; only for checks and tests."""
        P = np.zeros((self.width, self.d))
        P[:, self.cols] = np.eye(self.width)
        return P


def view_placements(view_dims) -> list[ViewPlacement]:
    dims = [int(w) for w in view_dims]
    d = sum(dims)
    offsets = np.concatenate([[0], np.cumsum(dims)[:-1]])
    return [ViewPlacement(int(o), w, d) for o, w in zip(offsets, dims)]


def place_view(M, v: int, view_dims) -> np.ndarray:
    return view_placements(view_dims)[v].place(M)


def extract_view(M, v: int, view_dims) -> np.ndarray:
    return view_placements(view_dims)[v].extract(M)
