"""k-means (k-means++ seeding, Lloyd iterations) and nearest-neighbour queries.

Distances are Euclidean. Every tie is broken towards the lowest index so that
results depend only on the input and the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DataError
from .rng import SplitMix64, derive_seed

MAX_ITER = 300
TOL = 1e-6


@dataclass
class Clustering:
    centroids: np.ndarray
    labels: np.ndarray
    objective: float
    history: list[float] = field(default_factory=list)
    n_iter: int = 0
    run_histories: list[list[float]] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.centroids)

    def members(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.labels == i)


def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - c[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _assign(x: np.ndarray, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d = _sq_dists(x, c)
    labels = np.argmin(d, axis=1)
    return labels, d[np.arange(len(x)), labels]


def _repair_empty(x: np.ndarray, c: np.ndarray, labels: np.ndarray, d2: np.ndarray) -> None:
    """Give each empty cluster the point farthest from its own centroid."""
    k = len(c)
    counts = np.bincount(labels, minlength=k)
    for j in np.flatnonzero(counts == 0):
        score = np.where(counts[labels] > 1, d2, -1.0)
        i = int(np.argmax(score))
        counts[labels[i]] -= 1
        labels[i] = j
        counts[j] = 1
        c[j] = x[i]
        d2[i] = 0.0


def kmeans_plusplus(x: np.ndarray, k: int, rng: SplitMix64) -> np.ndarray:
    n = len(x)
    centers = [int(rng.randbelow(n))]
    d2 = _sq_dists(x, x[centers]).min(axis=1)
    for _ in range(1, k):
        idx = rng.choice_weighted(d2) if d2.sum() > 0 else rng.randbelow(n)
        centers.append(int(idx))
        d2 = np.minimum(d2, _sq_dists(x, x[[idx]])[:, 0])
    return x[centers].astype(np.float64, copy=True)


def _lloyd(x, c, max_iter, tol):
    labels, d2 = _assign(x, c)
    _repair_empty(x, c, labels, d2)
    history = [float(d2.sum())]
    it = 0
    for it in range(1, max_iter + 1):
        c = np.stack([x[labels == j].mean(axis=0) for j in range(len(c))])
        new_labels, d2 = _assign(x, c)
        _repair_empty(x, c, new_labels, d2)
        history.append(float(d2.sum()))
        done = np.array_equal(new_labels, labels) or history[-2] - history[-1] < tol
        labels = new_labels
        if done:
            break
    return c, labels, history, it


def kmeans(
    points: np.ndarray,
    k: int,
    rng_seed: int,
    n_init: int = 10,
    max_iter: int = MAX_ITER,
    tol: float = TOL,
) -> Clustering:
    """Best of ``n_init`` k-means++ initialised Lloyd runs.

    Each run stops at an assignment fixpoint, after ``max_iter`` iterations,
    or when the objective improves by less than ``tol``. Empty clusters are
    repaired by stealing the point farthest from its centroid, so exactly
    ``k`` non-empty clusters come back.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2:
        raise DataError("points must be a 2-D array")
    if k <= 0:
        raise ConfigError(f"k must be positive, got {k}")
    if k > len(x):
        raise ConfigError(f"k={k} exceeds the number of points ({len(x)})")
    best = None
    histories = []
    for run in range(max(1, n_init)):
        rng = SplitMix64(derive_seed(rng_seed, run))
        c, labels, hist, it = _lloyd(x, kmeans_plusplus(x, k, rng), max_iter, tol)
        histories.append(hist)
        if best is None or hist[-1] < best.objective:
            best = Clustering(c, labels, hist[-1], hist, it)
    best.run_histories = histories
    return best


def _ranked(query: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    diff = candidates - query[None, :]
    d = np.einsum("ij,ij->i", diff, diff)
    return np.lexsort((np.arange(len(candidates)), d))


def knn(s: int, query: np.ndarray, candidates: np.ndarray) -> list[int]:
    """Indices of the ``s`` candidates closest to ``query`` (by distance, then index)."""
    candidates = np.asarray(candidates, dtype=np.float64).reshape(len(candidates), -1)
    if s > len(candidates):
        raise ConfigError(f"asked for {s} neighbours among {len(candidates)} candidates")
    if s < 0:
        raise ConfigError("s must be non-negative")
    return _ranked(np.asarray(query, dtype=np.float64), candidates)[:s].tolist()


def nearest_node(
    centroid: np.ndarray,
    z: np.ndarray,
    excluded: Iterable[int] = (),
    candidates: Sequence[int] | None = None,
) -> int:
    """Closest non-excluded node to ``centroid``; ties go to the lower id.

    ``candidates`` restricts the search to a subset of node ids.
    """
    ids = np.arange(len(z)) if candidates is None else np.asarray(sorted(candidates), dtype=np.int64)
    banned = set(int(u) for u in excluded)
    allowed = np.array([u for u in ids.tolist() if u not in banned], dtype=np.int64)
    if allowed.size == 0:
        raise DataError("every candidate node is excluded")
    order = _ranked(np.asarray(centroid, dtype=np.float64), z[allowed])
    return int(allowed[order[0]])
