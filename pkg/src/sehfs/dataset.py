"""Multi-view multi-label dataset container, on-disk format, normalization and folds.

On disk a dataset is a directory holding ``manifest.json`` plus one header-free
CSV per view and one for the labels::

    {"name": "emotions",
     "views": [{"name": "rhythmic", "file": "rhythmic.csv", "dims": 8}, ...],
     "labels": {"file": "labels.csv", "dims": 6},
     "samples": 593}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

NORMALIZATION_MODES = ("none", "minmax", "zscore")


class DatasetError(ValueError):
    """Raised for malformed manifests or inconsistent dataset contents."""


@dataclass(frozen=True)
class MultiViewDataset:
    """Per-view feature matrices sharing ``n`` rows, plus a binary label matrix."""

    views: list[np.ndarray]
    labels: np.ndarray
    view_names: list[str] = field(default_factory=list)
    name: str = "dataset"

    def __post_init__(self):
        views = [np.asarray(X, dtype=np.float64) for X in self.views]
        labels = np.asarray(self.labels)
        if not views:
            raise DatasetError("dataset needs at least one view")
        names = list(self.view_names) or [f"view{v}" for v in range(len(views))]
        if len(names) != len(views):
            raise DatasetError(f"{len(names)} view names for {len(views)} views")
        for v, X in enumerate(views):
            if X.ndim != 2 or X.shape[1] < 1:
                raise DatasetError(f"view {names[v]!r} is empty or not a matrix")
        n = views[0].shape[0]
        for v, X in enumerate(views):
            if X.shape[0] != n:
                raise DatasetError(
                    f"row-count mismatch: view {names[v]!r} has {X.shape[0]} rows, "
                    f"expected {n}"
                )
        if labels.ndim != 2 or labels.shape[1] < 1:
            raise DatasetError("labels must be an n x q matrix with q >= 1")
        if labels.shape[0] != n:
            raise DatasetError(
                f"row-count mismatch: labels have {labels.shape[0]} rows, expected {n}"
            )
        if not np.all((labels == 0) | (labels == 1)):
            raise DatasetError("labels must be 0/1")
        object.__setattr__(self, "views", views)
        object.__setattr__(self, "labels", labels.astype(np.float64))
        object.__setattr__(self, "view_names", names)

    @property
    def n(self) -> int:
        return self.views[0].shape[0]

    @property
    def q(self) -> int:
        return self.labels.shape[1]

    @property
    def n_views(self) -> int:
        return len(self.views)

    @property
    def view_dims(self) -> list[int]:
        return [X.shape[1] for X in self.views]

    @property
    def d(self) -> int:
        return sum(self.view_dims)

    @property
    def feature_offsets(self) -> list[int]:
        return [int(o) for o in np.concatenate([[0], np.cumsum(self.view_dims)[:-1]])]

    def concatenated(self) -> np.ndarray:
        """Views stacked column-wise in view order (n x d)."""
        return np.hstack(self.views)

    def subset_rows(self, idx) -> "MultiViewDataset":
        idx = np.asarray(idx)
        return MultiViewDataset(
            [X[idx] for X in self.views], self.labels[idx], self.view_names, self.name
        )


def _read_csv(path: Path) -> np.ndarray:
    if not path.is_file():
        raise FileNotFoundError(f"missing data file: {path}")
    M = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    if M.size == 0:
        raise DatasetError(f"empty data file: {path}")
    return M


def load_dataset(manifest_path) -> MultiViewDataset:
    """Load and validate a dataset from its ``manifest.json`` (or its directory)."""
    path = Path(manifest_path)
    if path.is_dir():
        path = path / "manifest.json"
    if not path.is_file():
        raise FileNotFoundError(f"missing manifest: {path}")
    try:
        manifest = json.loads(path.read_text())
        view_specs = manifest["views"]
        label_spec = manifest["labels"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DatasetError(f"malformed manifest {path}: {exc}") from exc
    root = path.parent

    views, names = [], []
    for spec in view_specs:
        X = _read_csv(root / spec["file"])
        if "dims" in spec and X.shape[1] != int(spec["dims"]):
            raise DatasetError(
                f"view {spec.get('name')!r}: manifest says {spec['dims']} columns, "
                f"file has {X.shape[1]}"
            )
        views.append(X)
        names.append(str(spec.get("name", f"view{len(names)}")))
    Y = _read_csv(root / label_spec["file"])
    if "dims" in label_spec and Y.shape[1] != int(label_spec["dims"]):
        raise DatasetError(
            f"labels: manifest says {label_spec['dims']} columns, file has {Y.shape[1]}"
        )
    data = MultiViewDataset(views, Y, names, str(manifest.get("name", root.name)))
    if "samples" in manifest and int(manifest["samples"]) != data.n:
        raise DatasetError(
            f"row-count mismatch: manifest says {manifest['samples']} samples, "
            f"files have {data.n}"
        )
    return data


def write_dataset(data: MultiViewDataset, directory) -> Path:
    """Write ``data`` in the manifest + CSV format; returns the manifest path."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    view_entries = []
    for name, X in zip(data.view_names, data.views):
        fname = f"{name}.csv"
        # repr-precision floats so a reload is element-wise identical
        np.savetxt(root / fname, X, delimiter=",", fmt="%.17g")
        view_entries.append({"name": name, "file": fname, "dims": int(X.shape[1])})
    np.savetxt(root / "labels.csv", data.labels, delimiter=",", fmt="%d")
    manifest = {
        "name": data.name,
        "views": view_entries,
        "labels": {"file": "labels.csv", "dims": data.q},
        "samples": data.n,
    }
    path = root / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def _normalize_columns(X: np.ndarray, mode: str) -> np.ndarray:
    if mode == "none":
        return X.copy()
    if mode == "minmax":
        lo = X.min(axis=0)
        span = X.max(axis=0) - lo
        out = np.zeros_like(X)
        ok = span > 0
        out[:, ok] = (X[:, ok] - lo[ok]) / span[ok]
        return out
    if mode == "zscore":
        mu = X.mean(axis=0)
        sd = X.std(axis=0)
        out = np.zeros_like(X)
        ok = sd > 0
        out[:, ok] = (X[:, ok] - mu[ok]) / sd[ok]
        return out
    raise ValueError(f"unknown normalization mode {mode!r}; use one of {NORMALIZATION_MODES}")


def normalize_features(data: MultiViewDataset, mode: str = "minmax") -> MultiViewDataset:
    """Per-column rescaling inside every view; constant columns become zeros."""
    views = [_normalize_columns(X, mode) for X in data.views]
    return MultiViewDataset(views, data.labels, data.view_names, data.name)


@dataclass(frozen=True)
class FoldPlan:
    fold_count: int
    assignments: np.ndarray

    def split(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        """(train indices, test indices) for one fold."""
        test = np.flatnonzero(self.assignments == fold)
        train = np.flatnonzero(self.assignments != fold)
        return train, test


def make_folds(n: int, fold_count: int = 10, seed: int = 0) -> FoldPlan:
    """Balanced fold assignment: seeded shuffle, then round-robin dealing."""
    if not 2 <= fold_count <= n:
        raise ValueError(f"fold_count must be in [2, {n}], got {fold_count}")
    perm = np.random.default_rng(seed).permutation(n)
    assignments = np.empty(n, dtype=np.int64)
    assignments[perm] = np.arange(n) % fold_count
    return FoldPlan(fold_count, assignments)
