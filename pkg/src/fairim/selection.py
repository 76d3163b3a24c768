"""Seed selection in embedding space.

Normal selection clusters all embeddings into ``budget`` groups and takes the
node nearest each centroid. Fair selection clusters into ``k`` groups, reads
per-cluster group quotas off the ``s`` nodes nearest each centroid, then
sub-clusters each group's members to the size of its quota.
"""

from __future__ import annotations

import numpy as np

from .clustering import kmeans, knn, nearest_node
from .errors import ConfigError, DataError
from .rng import derive_seed
from .seeds import SeedSet

DEFAULT_CLUSTERS = 4


def _check_budget(budget: int, n: int) -> None:
    if budget < 1:
        raise ConfigError(f"budget must be positive, got {budget}")
    if budget > n:
        raise ConfigError(f"budget {budget} exceeds the number of nodes ({n})")


def normal_selection(z: np.ndarray, budget: int, rng_seed: int) -> SeedSet:
    z = np.asarray(z, dtype=np.float64)
    _check_budget(budget, len(z))
    clus = kmeans(z, budget, rng_seed)
    chosen: list[int] = []
    for c in clus.centroids:
        chosen.append(nearest_node(c, z, excluded=chosen))
    return SeedSet(tuple(chosen), "normal_selection")


def cluster_quotas(sizes: list[int], budget: int) -> list[int]:
    """Split ``budget`` over clusters: ``budget // k`` each, remainder to the largest.

    A cluster never receives more than its population; any excess moves to the
    largest clusters that still have room.
    """
    k = len(sizes)
    by_size = sorted(range(k), key=lambda i: (-sizes[i], i))
    quotas = [budget // k] * k
    for i in by_size[: budget % k]:
        quotas[i] += 1
    excess = 0
    for i in range(k):
        if quotas[i] > sizes[i]:
            excess += quotas[i] - sizes[i]
            quotas[i] = sizes[i]
    while excess:
        for i in by_size:
            if excess and quotas[i] < sizes[i]:
                quotas[i] += 1
                excess -= 1
    return quotas


def fair_selection(
    z: np.ndarray,
    is_a: np.ndarray,
    budget: int,
    k_clusters: int = DEFAULT_CLUSTERS,
    rng_seed: int = 0,
) -> SeedSet:
    """Fair Selection of ``budget`` seeds.

    The returned seed set's ``info["clusters"]`` lists, per cluster, its
    population, quota ``s`` and the tallies ``n_a``/``n_b`` of the ``s``
    nearest members, with ``n_a + n_b == s``.
    """
    z = np.asarray(z, dtype=np.float64)
    is_a = np.asarray(is_a, dtype=bool)
    n = len(z)
    if is_a.shape != (n,):
        raise DataError("group labels must cover every embedding row")
    _check_budget(budget, n)
    if k_clusters < 1 or k_clusters > n:
        raise ConfigError(f"k_clusters must lie in [1, {n}], got {k_clusters}")
    clus = kmeans(z, k_clusters, derive_seed(rng_seed, 0))
    members = [clus.members(i) for i in range(k_clusters)]
    quotas = cluster_quotas([len(m) for m in members], budget)
    chosen: list[int] = []
    info = []
    for i, (g_i, s) in enumerate(zip(members, quotas)):
        near = g_i[knn(s, clus.centroids[i], z[g_i])]
        n_a = int(is_a[near].sum())
        n_b = s - n_a
        info.append({"cluster": i, "size": int(len(g_i)), "s": s, "n_a": n_a, "n_b": n_b})
        for j, (want, count) in enumerate(((True, n_a), (False, n_b))):
            if count == 0:
                continue
            sub = g_i[is_a[g_i] == want]
            sub_clus = kmeans(z[sub], count, derive_seed(rng_seed, 1, i, j))
            for c in sub_clus.centroids:
                chosen.append(nearest_node(c, z, excluded=chosen, candidates=sub))
    n_a = int(is_a[chosen].sum())
    return SeedSet(tuple(chosen), "fair_selection", info={"clusters": info, "seeds_a": n_a, "seeds_b": len(chosen) - n_a})
