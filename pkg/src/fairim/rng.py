"""Portable SplitMix64 random streams.

SplitMix64 is counter based: output ``k`` of the stream seeded with ``s`` is
``mix(s + (k + 1) * GOLDEN)``, so any output can be computed directly. That
property is what lets the cascade kernels draw one coin per edge without
materialising the whole stream, and lets rollouts run in any order.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
# 53-bit mantissa conversion keeps draws strictly below 1.0
_TO_UNIT = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def splitmix_at(seed: int, index: int) -> int:
    """Output number ``index`` (0-based) of the stream seeded with ``seed``."""
    return mix64((seed + (index + 1) * GOLDEN) & MASK64)


def derive_seed(seed: int, *path: int) -> int:
    """Derive a child seed by walking ``path`` through nested streams."""
    s = seed & MASK64
    for i in path:
        s = splitmix_at(s, int(i))
    return s


def u64_to_unit(x: int) -> float:
    return (x >> 11) * _TO_UNIT


def splitmix_block(seed: int, start: int, count: int) -> np.ndarray:
    """Vectorised outputs ``start .. start+count-1`` as ``uint64``."""
    k = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & MASK64) + k * np.uint64(GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
        z = z ^ (z >> np.uint64(31))
    return z


def unit_block(seed: int, start: int, count: int) -> np.ndarray:
    """Vectorised uniform draws in [0, 1) matching :func:`u64_to_unit`."""
    return (splitmix_block(seed, start, count) >> np.uint64(11)).astype(np.float64) * _TO_UNIT


class SplitMix64:
    """Sequential SplitMix64 generator.

    The state is a single 64-bit integer, which makes it trivial to record in
    checkpoints and manifests.
    """

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return mix64(self.state)

    def random(self) -> float:
        return u64_to_unit(self.next_u64())

    def uniform_array(self, count: int) -> np.ndarray:
        out = unit_block(self.state, 0, count)
        self.state = (self.state + count * GOLDEN) & MASK64
        return out

    def randbelow(self, bound: int) -> int:
        """Unbiased integer in ``[0, bound)`` by rejection sampling."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % bound

    def permutation(self, n: int) -> list[int]:
        items = list(range(n))
        self.shuffle(items)
        return items

    def shuffle(self, items: list) -> None:
        # Fisher-Yates, front to back so prefixes are stable across lengths
        n = len(items)
        for i in range(n - 1):
            j = i + self.randbelow(n - i)
            items[i], items[j] = items[j], items[i]

    def sample(self, n: int, k: int) -> list[int]:
        """First ``k`` entries of a front-to-back Fisher-Yates shuffle of ``range(n)``."""
        if not 0 <= k <= n:
            raise ValueError(f"cannot sample {k} of {n}")
        items = list(range(n))
        for i in range(k):
            j = i + self.randbelow(n - i)
            items[i], items[j] = items[j], items[i]
        return items[:k]

    def choice_weighted(self, weights: np.ndarray) -> int:
        """Index drawn with probability proportional to non-negative ``weights``."""
        cum = np.cumsum(weights)
        total = cum[-1]
        if not total > 0:
            raise ValueError("weights must have positive sum")
        r = self.random() * total
        idx = int(np.searchsorted(cum, r, side="right"))
        return min(idx, len(weights) - 1)

    def spawn(self, *path: int) -> "SplitMix64":
        return SplitMix64(derive_seed(self.state, *path))
