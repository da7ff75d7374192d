"""Synthetic multi-view multi-label datasets for tests, benchmarks and demos."""

from __future__ import annotations

import numpy as np

from .dataset import MultiViewDataset


def random_dataset(n=60, view_dims=(10, 10), q=3, seed=0, label_density=0.4) -> MultiViewDataset:
    """Uniform features and labels correlated with random feature projections."""
    rng = np.random.default_rng(seed)
    views = [rng.random((n, w)) for w in view_dims]
    X = np.hstack(views)
    proj = X @ rng.standard_normal((X.shape[1], q))
    thresh = np.quantile(proj, 1.0 - label_density, axis=0)
    Y = (proj > thresh).astype(float)
    return MultiViewDataset(views, Y, [f"v{v}" for v in range(len(views))], "random")


def planted_dataset(n=120, seed=0, flip=0.1, view_dims=(2, 4)) -> MultiViewDataset:
    """Six features, three labels; label j is a noisy thresholded copy of feature j.

    Features 0-2 are informative, 3-5 are independent uniform noise.  Label j
    is ``feature_j > 0.5`` with each entry flipped with probability ``flip``.
    Features are split across views by ``view_dims`` in global index order.
    """
    if sum(view_dims) != 6:
        raise ValueError("planted dataset has exactly 6 features")
    rng = np.random.default_rng(seed)
    X = rng.random((n, 6))
    Y = (X[:, :3] > 0.5).astype(float)
    flips = rng.random((n, 3)) < flip
    Y[flips] = 1.0 - Y[flips]
    offsets = np.concatenate([[0], np.cumsum(view_dims)])
    views = [X[:, offsets[v]:offsets[v + 1]] for v in range(len(view_dims))]
    return MultiViewDataset(views, Y, [f"v{v}" for v in range(len(views))], "planted")
