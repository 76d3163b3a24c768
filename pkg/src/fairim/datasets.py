"""Synthetic two-block SBM graphs and the Rice-Facebook age filter."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .graph import (
    GROUP_A,
    GROUP_B,
    AttributedGraph,
    binarize_attribute,
    load_attributes,
    load_edge_list,
    read_attribute_ids,
)
from .rng import unit_block

DEFAULT_ATTRIBUTE = "group"


@dataclass(frozen=True)
class SbmParams:
    n: int = 500
    r: float = 0.3
    p_intra_a: float = 0.025
    p_intra_b: float = 0.025
    p_inter: float = 0.001

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 2:
            raise ConfigError(f"n must be an integer >= 2, got {self.n!r}")
        if not 0.0 < self.r < 1.0:
            raise ConfigError(f"r must lie in (0, 1), got {self.r}")
        for name in ("p_intra_a", "p_intra_b", "p_inter"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {p}")
        if not 1 <= self.size_a < self.n:
            raise ConfigError(f"r*n rounds to {self.size_a}; both blocks need at least one node")

    @property
    def size_a(self) -> int:
        # round() is round-half-to-even
        return int(round(self.r * self.n))

    @property
    def size_b(self) -> int:
        return self.n - self.size_a

    def to_dict(self) -> dict:
        return asdict(self)


def _pair_probabilities(params: SbmParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n, na = params.n, params.size_a
    iu, iv = np.triu_indices(n, k=1)
    a_u, a_v = iu < na, iv < na
    prob = np.where(
        a_u & a_v, params.p_intra_a, np.where(~a_u & ~a_v, params.p_intra_b, params.p_inter)
    )
    return iu, iv, prob


def generate_sbm(params: SbmParams, rng_seed: int, attr: str = DEFAULT_ATTRIBUTE) -> AttributedGraph:
    """Sample a two-block SBM.

    Nodes ``0 .. size_a-1`` form group A. Pair ``(u, v)``, ``u < v``, in
    lexicographic position ``k`` is joined when the ``k``-th uniform draw of the
    SplitMix64 stream seeded by ``rng_seed`` falls below its block probability.
    """
    iu, iv, prob = _pair_probabilities(params)
    draws = unit_block(rng_seed, 0, len(iu))
    hit = draws < prob
    edges = np.stack([iu[hit], iv[hit]], axis=1)
    is_a = np.arange(params.n) < params.size_a
    return AttributedGraph(n=params.n, edges=edges, labels={attr: is_a}, attribute_names=(attr,))


def expected_edge_counts(params: SbmParams) -> tuple[float, float, float]:
    na, nb = params.size_a, params.size_b
    return (
        math.comb(na, 2) * params.p_intra_a,
        math.comb(nb, 2) * params.p_intra_b,
        na * nb * params.p_inter,
    )


def edge_count_std(params: SbmParams) -> tuple[float, float, float]:
    """Binomial standard deviations matching :func:`expected_edge_counts`."""
    na, nb = params.size_a, params.size_b
    trials = (math.comb(na, 2), math.comb(nb, 2), na * nb)
    probs = (params.p_intra_a, params.p_intra_b, params.p_inter)
    return tuple(math.sqrt(t * p * (1 - p)) for t, p in zip(trials, probs))


def edge_counts_by_block(g: AttributedGraph, attr: str) -> tuple[int, int, int]:
    """Observed ``(intra_a, intra_b, inter)`` edge counts."""
    lab = g.labels[attr]
    if not g.m:
        return 0, 0, 0
    a_u, a_v = lab[g.edges[:, 0]], lab[g.edges[:, 1]]
    return int((a_u & a_v).sum()), int((~a_u & ~a_v).sum()), int((a_u != a_v).sum())


RICE_MAX_AGE = 20
RICE_MAX_AGE_A = 19


def _age_value(node: int, value) -> float:
    if value is None or value == "":
        raise DataError(f"node {node}: missing age")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise DataError(f"node {node}: non-numeric age {value!r}") from None


def rice_filter(g: AttributedGraph, age_attr: str = "age") -> AttributedGraph:
    """Keep nodes aged at most 20 (induced subgraph); ages 18-19 become group A.

    Labels are installed under ``age_attr``; the raw ages stay available.
    """
    if age_attr not in g.raw_attributes:
        raise DataError(f"graph has no {age_attr!r} attribute")
    ages = [_age_value(u, v) for u, v in enumerate(g.raw_attributes[age_attr])]
    keep = [u for u, a in enumerate(ages) if a <= RICE_MAX_AGE]
    sub = g.induced_subgraph(keep)
    return binarize_attribute(sub, age_attr, lambda a: GROUP_A if float(a) <= RICE_MAX_AGE_A else GROUP_B)


FIXTURE_DIR = Path(__file__).resolve().parent / "data"
RICE_FIXTURE = (FIXTURE_DIR / "rice_fixture.edges", FIXTURE_DIR / "rice_fixture_attributes.csv")
# group sizes and (intra-A, intra-B, inter) edge counts of the bundled fixture
RICE_FIXTURE_COUNTS = {"A": 5, "B": 7, "edges": (5, 7, 3)}


def load_rice(edges_path, attributes_path, age_attr: str = "age") -> AttributedGraph:
    """Load an age-annotated friendship graph and apply :func:`rice_filter`.

    Node ids may be sparse; nodes listed only in the attribute file are kept
    as isolated vertices.
    """
    extra = read_attribute_ids(attributes_path)
    g, id_map = load_edge_list(edges_path, remap=True, extra_ids=extra)
    g = load_attributes(attributes_path, g, id_map)
    return rice_filter(g, age_attr)
