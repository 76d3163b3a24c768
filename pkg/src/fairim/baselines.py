"""Influence-maximisation baselines: lazy greedy (CELF), top degree, random.

Greedy scores seed sets on one fixed sample of ``R`` live-edge realisations
(common random numbers): every candidate in every iteration is evaluated on
the same coins. On a fixed sample, expected influence is a coverage function
of connected components, which is exactly submodular, so the lazy and plain
greedy loops pick identical seeds.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .diffusion import CascadeParams, rollout_sub_seeds
from .errors import ConfigError
from .graph import AttributedGraph
from .rng import SplitMix64
from .seeds import SeedSet


@dataclass
class GreedyTrace:
    nodes: list[int] = field(default_factory=list)
    gains: list[float] = field(default_factory=list)
    gain_stderr: list[float] = field(default_factory=list)
    evaluations: list[int] = field(default_factory=list)

    def rows(self) -> list[list]:
        return [
            [i + 1, u, g, se, ev]
            for i, (u, g, se, ev) in enumerate(zip(self.nodes, self.gains, self.gain_stderr, self.evaluations))
        ]

    HEADER = ["iteration", "node", "marginal_gain", "gain_stderr", "evaluations"]


class LiveEdgeSample:
    """Fixed live-edge realisations with incremental coverage bookkeeping."""

    def __init__(self, g: AttributedGraph, p: float, rollouts: int, rng_seed: int):
        CascadeParams(p, rollouts)
        ip, ix, ei = g.csr
        sub = rollout_sub_seeds(rng_seed, rollouts)
        self.labels, self.sizes = kernels.live_edge_components(ip, ix, ei, float(p), sub)
        self.rollouts = rollouts
        self.n = g.n
        self._rows = np.arange(rollouts)
        self.covered = np.zeros((rollouts, g.n), dtype=bool)

    def gains(self, nodes=None) -> np.ndarray:
        """Per-rollout marginal gains, shape ``(R,)`` for one node or ``(R, k)``."""
        lab = self.labels if nodes is None else self.labels[:, nodes]
        rows = self._rows if lab.ndim == 1 else self._rows[:, None]
        return np.where(self.covered[rows, lab], 0, self.sizes[rows, lab])

    def gain_total(self, v: int) -> int:
        return int(self.gains(v).sum())

    def reset(self) -> None:
        self.covered[:] = False

    def add(self, v: int) -> None:
        self.covered[self._rows, self.labels[:, v]] = True

    def influence(self, seeds) -> float:
        """Mean influenced count of ``seeds`` on this sample (independent of coverage state)."""
        seeds = list(seeds)
        total = 0
        for r in range(self.rollouts):
            comps = set(self.labels[r, seeds].tolist())
            total += int(sum(self.sizes[r, c] for c in comps))
        return total / self.rollouts


def _check_budget(budget: int, n: int) -> None:
    if budget < 1 or budget > n:
        raise ConfigError(f"budget must lie in [1, {n}], got {budget}")


def lazy_greedy(n: int, budget: int, gain: Callable[[int], float], commit: Callable[[int], None]) -> tuple[list[int], list[float], list[int]]:
    """CELF over nodes ``0..n-1``. Ties go to the lowest node id.

    ``gain(v)`` must return the current marginal gain of ``v``; ``commit(v)``
    records ``v`` as chosen. Returns chosen nodes, their gains, and the number
    of gain evaluations spent per iteration.
    """
    heap = [(-gain(v), v, 0) for v in range(n)]
    heapq.heapify(heap)
    chosen, gains, evals = [], [], []
    spent = n
    for it in range(budget):
        while True:
            neg, v, stamp = heapq.heappop(heap)
            if stamp == it:
                break
            heapq.heappush(heap, (-gain(v), v, it))
            spent += 1
        chosen.append(v)
        gains.append(-neg)
        evals.append(spent)
        commit(v)
        spent = 0
    return chosen, gains, evals


def plain_greedy(n: int, budget: int, gain: Callable[[int], float], commit: Callable[[int], None]) -> tuple[list[int], list[float], list[int]]:
    """Non-lazy greedy: re-evaluates every remaining node each iteration."""
    chosen, gains, evals = [], [], []
    remaining = list(range(n))
    for _ in range(budget):
        scored = [(gain(v), v) for v in remaining]
        best = max(scored, key=lambda t: (t[0], -t[1]))
        chosen.append(best[1])
        gains.append(best[0])
        evals.append(len(remaining))
        remaining.remove(best[1])
        commit(best[1])
    return chosen, gains, evals


def greedy_celf(
    g: AttributedGraph, p: float, budget: int, rollouts: int = 1000, rng_seed: int = 0, lazy: bool = True
) -> tuple[SeedSet, GreedyTrace]:
    """Greedy seed selection maximising Monte Carlo expected influence."""
    _check_budget(budget, g.n)
    sample = LiveEdgeSample(g, p, rollouts, rng_seed)
    loop = lazy_greedy if lazy else plain_greedy
    nodes, totals, evals = loop(g.n, budget, sample.gain_total, sample.add)
    trace = GreedyTrace(evaluations=evals)
    sample.reset()
    for v, tot in zip(nodes, totals):
        per = sample.gains(v)
        trace.nodes.append(v)
        trace.gains.append(tot / rollouts)
        trace.gain_stderr.append(float(per.std(ddof=1) / math.sqrt(rollouts)) if rollouts > 1 else 0.0)
        sample.add(v)
    return SeedSet(tuple(nodes), "greedy"), trace


def greedy_by_score(n: int, budget: int, score: Callable[[tuple[int, ...]], float], lazy: bool = True) -> list[int]:
    """Greedy with an arbitrary set-function ``score`` (e.g. the exact oracle)."""
    chosen: list[int] = []
    base = [0.0]

    def gain(v):
        return score(tuple(chosen) + (v,)) - base[0] if v not in chosen else -math.inf

    def commit(v):
        chosen.append(v)
        base[0] = score(tuple(chosen))

    (lazy_greedy if lazy else plain_greedy)(n, budget, gain, commit)
    return chosen


def degree_seeds(g: AttributedGraph, budget: int) -> SeedSet:
    _check_budget(budget, g.n)
    deg = g.degrees()
    order = np.lexsort((np.arange(g.n), -deg))
    return SeedSet(tuple(order[:budget].tolist()), "degree")


def random_seeds(g: AttributedGraph, budget: int, rng_seed: int) -> SeedSet:
    """Uniform sample without replacement; smaller budgets give prefixes."""
    _check_budget(budget, g.n)
    return SeedSet(tuple(SplitMix64(rng_seed).sample(g.n, budget)), "random")
