# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled live-edge cascade kernels.

Edge ``e`` is open in the rollout with sub-seed ``s`` when
``(mix64(s + (e + 1) * GOLDEN) >> 11) * 2**-53 < p``. The pure-Python
backend in ``_cascade_py`` implements the same rule and must agree bit for bit.
"""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t, int32_t, uint8_t

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double TO_UNIT = 1.0 / 9007199254740992.0


cdef inline uint64_t mix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline bint edge_open(uint64_t sub_seed, int64_t e, double p) nogil:
    cdef uint64_t x = mix64(sub_seed + <uint64_t>(e + 1) * GOLDEN)
    return <double>(x >> 11) * TO_UNIT < p


cdef int64_t _reach(
    const int64_t[::1] indptr,
    const int64_t[::1] indices,
    const int64_t[::1] edge_ids,
    const int64_t[::1] seeds,
    double p,
    uint64_t sub_seed,
    uint8_t[::1] visited,
    int64_t[::1] stack,
) nogil:
    """Mark nodes reachable from ``seeds``; return how many were marked.

    ``stack[:count]`` lists the marked nodes afterwards so callers can reset
    ``visited`` in O(count).
    """
    cdef int64_t top = 0, head = 0, u, v, j
    for j in range(seeds.shape[0]):
        u = seeds[j]
        if not visited[u]:
            visited[u] = 1
            stack[top] = u
            top += 1
    while head < top:
        u = stack[head]
        head += 1
        for j in range(indptr[u], indptr[u + 1]):
            v = indices[j]
            if visited[v]:
                continue
            if edge_open(sub_seed, edge_ids[j], p):
                visited[v] = 1
                stack[top] = v
                top += 1
    return top


def cascade_mask(indptr, indices, edge_ids, seeds, double p, sub_seed):
    cdef int64_t n = indptr.shape[0] - 1
    visited = np.zeros(n, dtype=np.uint8)
    stack = np.empty(max(n, 1), dtype=np.int64)
    _reach(indptr, indices, edge_ids, seeds, p, <uint64_t>sub_seed, visited, stack)
    return visited.astype(bool)


def cascade_sums(indptr, indices, edge_ids, seeds, double p, sub_seeds, weights):
    """Per-rollout sums of ``weights`` rows over the influenced set."""
    cdef int64_t n = indptr.shape[0] - 1
    cdef const uint64_t[::1] ss = sub_seeds
    cdef const int64_t[:, ::1] w = weights
    cdef int64_t R = ss.shape[0], c = w.shape[1]
    out = np.zeros((R, c), dtype=np.int64)
    cdef int64_t[:, ::1] o = out
    cdef uint8_t[::1] visited = np.zeros(n, dtype=np.uint8)
    cdef int64_t[::1] stack = np.empty(max(n, 1), dtype=np.int64)
    cdef const int64_t[::1] ip = indptr
    cdef const int64_t[::1] ix = indices
    cdef const int64_t[::1] ei = edge_ids
    cdef const int64_t[::1] sd = seeds
    cdef int64_t r, k, t, u, count
    with nogil:
        for r in range(R):
            count = _reach(ip, ix, ei, sd, p, ss[r], visited, stack)
            for k in range(count):
                u = stack[k]
                visited[u] = 0
                for t in range(c):
                    o[r, t] += w[u, t]
    return out


def live_edge_components(indptr, indices, edge_ids, double p, sub_seeds):
    """Component labels of each live-edge realisation.

    ``labels[r, u]`` is the smallest node id in ``u``'s component in rollout
    ``r``; ``sizes[r, v]`` is the size of the component labelled ``v``.
    """
    cdef int64_t n = indptr.shape[0] - 1
    cdef const uint64_t[::1] ss = sub_seeds
    cdef int64_t R = ss.shape[0]
    labels = np.empty((R, n), dtype=np.int32)
    sizes = np.zeros((R, n), dtype=np.int32)
    cdef int32_t[:, ::1] lab = labels
    cdef int32_t[:, ::1] sz = sizes
    cdef int64_t[::1] stack = np.empty(max(n, 1), dtype=np.int64)
    cdef const int64_t[::1] ip = indptr
    cdef const int64_t[::1] ix = indices
    cdef const int64_t[::1] ei = edge_ids
    cdef int64_t r, root, top, head, u, v, j
    cdef uint64_t s
    with nogil:
        for r in range(R):
            s = ss[r]
            for u in range(n):
                lab[r, u] = -1
            for root in range(n):
                if lab[r, root] >= 0:
                    continue
                lab[r, root] = <int32_t>root
                stack[0] = root
                top = 1
                head = 0
                while head < top:
                    u = stack[head]
                    head += 1
                    for j in range(ip[u], ip[u + 1]):
                        v = ix[j]
                        if lab[r, v] >= 0:
                            continue
                        if edge_open(s, ei[j], p):
                            lab[r, v] = <int32_t>root
                            stack[top] = v
                            top += 1
                sz[r, root] = <int32_t>top
    return labels, sizes
