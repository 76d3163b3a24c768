"""Independent-cascade influence under the live-edge formulation.

Every edge carries one coin per rollout; a node is influenced when an open
path joins it to a seed. Seeds count as influenced. Rollout ``i`` of an
estimate seeded with ``s`` uses sub-seed ``splitmix_at(s, i)``, so the
estimate does not depend on the order rollouts are evaluated in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import ConfigError, DataError
from .graph import AttributedGraph
from .rng import splitmix_block
from .seeds import as_seed_array

EXACT_MAX_EDGES = 20


@dataclass(frozen=True)
class CascadeParams:
    p: float
    rollouts: int = 1000
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ConfigError(f"activation probability must lie in [0, 1], got {self.p}")
        if int(self.rollouts) < 1:
            raise ConfigError(f"rollouts must be positive, got {self.rollouts}")


@dataclass
class InfluenceReport:
    """Expected influence, in total and per group.

    Counts are expected numbers of influenced nodes; fractions divide by the
    population (``n`` or the group size). ``stderr`` holds Monte Carlo
    standard errors keyed ``"total"``, ``"total_count"``, ``"<attr>:A"`` and
    ``"<attr>:B"`` (fractions) and ``"<attr>:disparity"``; all zero for exact
    reports.
    """

    n: int
    seeds: tuple[int, ...]
    p: float
    rollouts: int | None
    rng_seed: int | None
    total_count: float
    group_counts: dict[str, tuple[float, float]]
    group_sizes: dict[str, tuple[int, int]]
    stderr: dict[str, float] = field(default_factory=dict)
    seeds_counted: bool = True
    method: str = "monte_carlo"

    @property
    def total_fraction(self) -> float:
        return self.total_count / self.n

    @property
    def per_group_fraction(self) -> dict[str, tuple[float, float]]:
        out = {}
        for attr, (ia, ib) in self.group_counts.items():
            na, nb = self.group_sizes[attr]
            out[attr] = (ia / na if na else math.nan, ib / nb if nb else math.nan)
        return out

    @property
    def disparities(self) -> dict[str, float]:
        return {a: abs(fa - fb) for a, (fa, fb) in self.per_group_fraction.items()}

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "seeds": list(self.seeds),
            "p": self.p,
            "rollouts": self.rollouts,
            "rng_seed": self.rng_seed,
            "method": self.method,
            "seeds_counted_as_influenced": self.seeds_counted,
            "total_count": self.total_count,
            "total_fraction": self.total_fraction,
            "group_sizes": {k: list(v) for k, v in self.group_sizes.items()},
            "group_counts": {k: list(v) for k, v in self.group_counts.items()},
            "per_group_fraction": {k: list(v) for k, v in self.per_group_fraction.items()},
            "disparity": self.disparities,
            "stderr": dict(self.stderr),
        }


def _attr_names(g: AttributedGraph, attr_names: Sequence[str] | None) -> tuple[str, ...]:
    names = tuple(g.attribute_names if attr_names is None else attr_names)
    for a in names:
        if a not in g.labels:
            raise DataError(f"attribute {a!r} is not binarized on this graph")
    return names


def _weights(g: AttributedGraph, names: Sequence[str]) -> np.ndarray:
    cols = [np.ones(g.n, dtype=np.int64)]
    for a in names:
        lab = g.labels[a].astype(np.int64)
        cols += [lab, 1 - lab]
    return np.ascontiguousarray(np.stack(cols, axis=1))


def simulate_once(g: AttributedGraph, seeds: Iterable[int], p: float, sub_seed: int) -> set[int]:
    """Influenced node set for one live-edge realisation.

    ``sub_seed`` fixes the coins: edge ``e`` is open when draw ``e`` of the
    SplitMix64 stream seeded with ``sub_seed`` is below ``p``. Calls sharing a
    sub-seed see the same realisation.
    """
    CascadeParams(p)
    s = as_seed_array(seeds, g.n)
    ip, ix, ei = g.csr
    mask = kernels.cascade_mask(ip, ix, ei, s, float(p), int(sub_seed))
    return set(np.flatnonzero(mask).tolist())


def rollout_sub_seeds(rng_seed: int, rollouts: int) -> np.ndarray:
    return splitmix_block(rng_seed, 0, int(rollouts))


def rollout_counts(
    g: AttributedGraph, seeds: Iterable[int], p: float, sub_seeds: np.ndarray, attr_names=None
) -> np.ndarray:
    """Per-rollout counts: column 0 total, then (A, B) per attribute."""
    names = _attr_names(g, attr_names)
    s = as_seed_array(seeds, g.n)
    ip, ix, ei = g.csr
    return kernels.cascade_sums(ip, ix, ei, s, float(p), np.ascontiguousarray(sub_seeds, dtype=np.uint64), _weights(g, names))


def _stderr(x: np.ndarray) -> float:
    if len(x) < 2:
        return 0.0
    return float(np.std(x, ddof=1) / math.sqrt(len(x)))


def report_from_counts(
    g: AttributedGraph, seeds, counts: np.ndarray, names: Sequence[str], p: float, rollouts, rng_seed
) -> InfluenceReport:
    counts = counts.astype(np.float64)
    group_counts, group_sizes = {}, {}
    stderr = {"total": _stderr(counts[:, 0] / g.n), "total_count": _stderr(counts[:, 0])}
    for i, a in enumerate(names):
        ca, cb = counts[:, 1 + 2 * i], counts[:, 2 + 2 * i]
        na, nb = g.group_sizes(a)
        group_counts[a] = (float(ca.mean()), float(cb.mean()))
        group_sizes[a] = (na, nb)
        stderr[f"{a}:A_count"] = _stderr(ca)
        stderr[f"{a}:B_count"] = _stderr(cb)
        if na and nb:
            fa, fb = ca / na, cb / nb
            stderr[f"{a}:A"] = _stderr(fa)
            stderr[f"{a}:B"] = _stderr(fb)
            stderr[f"{a}:disparity"] = _stderr(fa - fb)
    return InfluenceReport(
        n=g.n,
        seeds=tuple(int(u) for u in seeds),
        p=float(p),
        rollouts=rollouts,
        rng_seed=rng_seed,
        total_count=float(counts[:, 0].mean()),
        group_counts=group_counts,
        group_sizes=group_sizes,
        stderr=stderr,
    )


def estimate_influence(
    g: AttributedGraph, seeds: Iterable[int], params: CascadeParams, attr_names: Sequence[str] | None = None
) -> InfluenceReport:
    """Monte Carlo estimate averaging ``params.rollouts`` independent rollouts."""
    names = _attr_names(g, attr_names)
    seeds = tuple(as_seed_array(seeds, g.n).tolist())
    sub = rollout_sub_seeds(params.rng_seed, params.rollouts)
    counts = rollout_counts(g, seeds, params.p, sub, names)
    return report_from_counts(g, seeds, counts, names, params.p, int(params.rollouts), params.rng_seed)


# ---------------------------------------------------------------- exact oracle


def _all_live_edge_reach(g: AttributedGraph, seeds: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reached-node matrix for every live-edge subset, and each subset's open count.

    Row ``mask`` corresponds to the subset whose bit ``e`` says edge ``e`` is open.
    """
    m = g.m
    masks = np.arange(1 << m, dtype=np.int64)
    open_bits = ((masks[:, None] >> np.arange(m)) & 1).astype(bool)
    reached = np.zeros((1 << m, g.n), dtype=bool)
    reached[:, seeds] = True
    changed = True
    while changed:
        before = reached.sum()
        for e, (u, v) in enumerate(g.edges):
            ob = open_bits[:, e]
            reached[:, v] |= reached[:, u] & ob
            reached[:, u] |= reached[:, v] & ob
        changed = reached.sum() != before
    return reached, open_bits.sum(axis=1)


def influenced_set_distribution(g: AttributedGraph, seeds: Iterable[int], p: float) -> dict[frozenset, float]:
    """``q_S(U)``: probability that exactly the node set ``U`` ends up influenced.

    Sums ``p**open * (1-p)**closed`` over all ``2**m`` live-edge subsets.
    """
    CascadeParams(p)
    if g.m > EXACT_MAX_EDGES:
        raise DataError(f"exact enumeration refused: {g.m} edges exceeds the limit of {EXACT_MAX_EDGES}")
    s = as_seed_array(seeds, g.n)
    reached, k = _all_live_edge_reach(g, s)
    weight = p**k * (1.0 - p) ** (g.m - k)
    q: dict[frozenset, float] = {}
    for row, w in zip(reached, weight):
        if w == 0.0:
            continue
        key = frozenset(np.flatnonzero(row).tolist())
        q[key] = q.get(key, 0.0) + float(w)
    return q


def exact_influence(
    g: AttributedGraph, seeds: Iterable[int], p: float, attr_names: Sequence[str] | None = None
) -> InfluenceReport:
    """Exact expected influence by enumerating every live-edge realisation.

    Group counts are ``sum_U q_S(U) * |U_A|`` over the distribution of
    influenced sets; refuses graphs with more than ``EXACT_MAX_EDGES`` edges.
    """
    names = _attr_names(g, attr_names)
    s = tuple(as_seed_array(seeds, g.n).tolist())
    q = influenced_set_distribution(g, s, p)
    total = sum(w * len(U) for U, w in q.items())
    group_counts, group_sizes = {}, {}
    for a in names:
        lab = g.labels[a]
        ia = sum(w * sum(1 for u in U if lab[u]) for U, w in q.items())
        ib = sum(w * sum(1 for u in U if not lab[u]) for U, w in q.items())
        group_counts[a] = (ia, ib)
        group_sizes[a] = g.group_sizes(a)
    return InfluenceReport(
        n=g.n,
        seeds=s,
        p=float(p),
        rollouts=None,
        rng_seed=None,
        total_count=total,
        group_counts=group_counts,
        group_sizes=group_sizes,
        stderr={"total": 0.0, "total_count": 0.0},
        method="exact",
    )


def disparity(report: InfluenceReport, attr: str) -> float:
    """``|I_A/|A| - I_B/|B||`` for ``attr``; undefined when a group is empty."""
    if attr not in report.group_counts:
        raise DataError(f"report has no attribute {attr!r}")
    na, nb = report.group_sizes[attr]
    if na == 0 or nb == 0:
        raise DataError(f"disparity undefined for {attr!r}: group sizes are ({na}, {nb})")
    fa, fb = report.per_group_fraction[attr]
    return abs(fa - fb)
