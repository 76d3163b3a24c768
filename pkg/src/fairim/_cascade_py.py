"""Pure-Python/numpy implementation of the cascade kernels.

Used when the compiled extension is unavailable. Coins come from the same
counter-based SplitMix64 rule as ``_cascade.pyx``, so results are identical.
"""

from collections import deque

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .rng import unit_block


def _open_edges(sub_seed: int, m: int, p: float) -> np.ndarray:
    return unit_block(int(sub_seed), 0, m) < p


def _reach(indptr, indices, edge_ids, seeds, is_open) -> list[int]:
    visited = set()
    order = []
    for u in seeds:
        u = int(u)
        if u not in visited:
            visited.add(u)
            order.append(u)
    queue = deque(order)
    ip, ix, ei = indptr.tolist(), indices.tolist(), edge_ids.tolist()
    while queue:
        u = queue.popleft()
        for j in range(ip[u], ip[u + 1]):
            v = ix[j]
            if v not in visited and is_open[ei[j]]:
                visited.add(v)
                order.append(v)
                queue.append(v)
    return order


def _edge_count(edge_ids) -> int:
    return int(edge_ids.max()) + 1 if len(edge_ids) else 0


def cascade_mask(indptr, indices, edge_ids, seeds, p, sub_seed):
    n = len(indptr) - 1
    is_open = _open_edges(sub_seed, _edge_count(edge_ids), p)
    mask = np.zeros(n, dtype=bool)
    mask[_reach(indptr, indices, edge_ids, seeds, is_open)] = True
    return mask


def cascade_sums(indptr, indices, edge_ids, seeds, p, sub_seeds, weights):
    m = _edge_count(edge_ids)
    out = np.zeros((len(sub_seeds), weights.shape[1]), dtype=np.int64)
    for r, s in enumerate(sub_seeds.tolist()):
        reached = _reach(indptr, indices, edge_ids, seeds, _open_edges(s, m, p))
        out[r] = weights[reached].sum(axis=0)
    return out


def live_edge_components(indptr, indices, edge_ids, p, sub_seeds):
    n = len(indptr) - 1
    m = _edge_count(edge_ids)
    src = np.repeat(np.arange(n), np.diff(indptr))
    first = src < indices  # each undirected edge once
    u, v, e = src[first], indices[first], edge_ids[first]
    R = len(sub_seeds)
    labels = np.empty((R, n), dtype=np.int32)
    sizes = np.zeros((R, n), dtype=np.int32)
    for r, s in enumerate(sub_seeds.tolist()):
        keep = _open_edges(s, m, p)[e]
        adj = coo_matrix((np.ones(int(keep.sum())), (u[keep], v[keep])), shape=(n, n))
        _, comp = connected_components(adj, directed=False)
        root = np.full(comp.max() + 1 if n else 0, n, dtype=np.int64)
        np.minimum.at(root, comp, np.arange(n))
        labels[r] = root[comp]
        sizes[r] = np.bincount(labels[r], minlength=n)
    return labels, sizes
