from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class SeedSet:
    """Ordered, duplicate-free seed nodes plus how they were chosen."""

    nodes: tuple[int, ...]
    method: str = "manual"
    group_counts: dict = field(default_factory=dict, compare=False)
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        nodes = tuple(int(u) for u in self.nodes)
        if len(set(nodes)) != len(nodes):
            raise DataError(f"duplicate seed nodes in {nodes}")
        object.__setattr__(self, "nodes", nodes)

    @property
    def budget(self) -> int:
        return len(self.nodes)

    def __iter__(self) -> Iterator[int]:
        return iter(self.nodes)

    def __len__(self) -> int:
        return len(self.nodes)

    def prefix(self, k: int) -> "SeedSet":
        return SeedSet(self.nodes[:k], self.method, info=dict(self.info))

    def with_counts(self, g) -> "SeedSet":
        counts = {}
        for attr in g.attribute_names:
            lab = g.labels[attr]
            a = int(sum(lab[u] for u in self.nodes))
            counts[attr] = (a, len(self.nodes) - a)
        return SeedSet(self.nodes, self.method, counts, dict(self.info))

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "budget": self.budget,
            "method": self.method,
            "group_counts": {k: list(v) for k, v in self.group_counts.items()},
            "info": self.info,
        }


def as_seed_array(seeds: Iterable[int], n: int) -> np.ndarray:
    arr = np.array(list(dict.fromkeys(int(u) for u in seeds)), dtype=np.int64)
    if arr.size == 0:
        raise DataError("seed set is empty")
    bad = arr[(arr < 0) | (arr >= n)]
    if bad.size:
        raise DataError(f"seed {int(bad[0])} outside [0, {n})")
    return arr


def read_seed_file(path) -> SeedSet:
    nodes = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                nodes.append(int(line))
            except ValueError:
                raise DataError(f"{path}:{lineno}: malformed node id {line!r}") from None
    return SeedSet(tuple(nodes), "file")


def write_seed_file(seeds: SeedSet, path) -> None:
    with open(path, "w") as fh:
        for u in seeds.nodes:
            fh.write(f"{u}\n")
