import itertools
import math

import numpy as np
import pytest

from conftest import labelled, random_graph
from fairim.diffusion import (
    CascadeParams,
    InfluenceReport,
    disparity,
    estimate_influence,
    exact_influence,
    influenced_set_distribution,
    rollout_counts,
    rollout_sub_seeds,
    simulate_once,
)
from fairim.errors import ConfigError, DataError
from fairim.graph import AttributedGraph
from fairim.rng import unit_block


def brute_force_expected(g, seeds, p):
    """Independent oracle: explicit loop over live-edge subsets with a BFS per subset."""
    total = 0.0
    for bits in itertools.product([0, 1], repeat=g.m):
        w = math.prod(p if b else 1 - p for b in bits)
        adj = {u: [] for u in range(g.n)}
        for b, (u, v) in zip(bits, g.edges.tolist()):
            if b:
                adj[u].append(v)
                adj[v].append(u)
        seen, stack = set(seeds), list(seeds)
        while stack:
            for v in adj[stack.pop()]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        total += w * len(seen)
    return total


def test_p_zero_influences_only_seeds(triangle):
    assert simulate_once(triangle, [1], 0.0, 123) == {1}


def test_p_one_influences_component():
    g = AttributedGraph.from_edges(5, [(0, 1), (1, 2), (3, 4)])
    assert simulate_once(g, [2], 1.0, 7) == {0, 1, 2}
    assert simulate_once(g, [0, 4], 1.0, 7) == {0, 1, 2, 3, 4}


def test_forced_coin_stream_path():
    g = AttributedGraph.from_edges(3, [(0, 1), (1, 2)])
    # find a sub-seed whose coins open edge (0,1) and close edge (1,2)
    sub = next(s for s in range(1000) if unit_block(s, 0, 2)[0] < 0.5 <= unit_block(s, 0, 2)[1])
    assert simulate_once(g, [0], 0.5, sub) == {0, 1}


def test_seed_out_of_range(triangle):
    with pytest.raises(DataError):
        simulate_once(triangle, [3], 0.5, 0)
    with pytest.raises(DataError):
        simulate_once(triangle, [], 0.5, 0)


def test_cascade_params_validation():
    with pytest.raises(ConfigError):
        CascadeParams(1.5)
    with pytest.raises(ConfigError):
        CascadeParams(0.5, rollouts=0)


def test_edgeless_graph_zero_variance():
    g = labelled(4, [], [0, 1])
    rep = estimate_influence(g, [0, 2], CascadeParams(0.7, 500, 1))
    assert rep.total_count == 2.0
    assert rep.stderr["total"] == 0.0


def test_single_edge_closed_form(path2):
    rep = estimate_influence(path2, [0], CascadeParams(0.5, 100_000, 3))
    assert abs(rep.total_count - 1.5) < 0.01
    # binomial half-width check
    assert rep.stderr["total_count"] == pytest.approx(0.5 / math.sqrt(100_000), rel=0.02)


def test_triangle_enumeration(triangle):
    # P(node 1 reached) = p + (1-p) p^2 = 0.625; same for node 2
    assert exact_influence(triangle, [0], 0.5).total_count == pytest.approx(2.25)
    assert brute_force_expected(triangle, [0], 0.5) == pytest.approx(2.25)
    rep = estimate_influence(triangle, [0], CascadeParams(0.5, 20_000, 9))
    assert abs(rep.total_count - 2.25) <= 4 * rep.stderr["total_count"]


def test_exact_single_edge(path2):
    rep = exact_influence(path2, [0], 0.5)
    assert rep.total_count == 1.5
    assert rep.group_counts["group"] == (1.0, 0.5)


def test_exact_p_one_is_component_size():
    g = labelled(6, [(0, 1), (1, 2), (3, 4)], [0, 3])
    assert exact_influence(g, [4], 1.0).total_count == 2
    assert exact_influence(g, [0, 5], 1.0).total_count == 4


def test_exact_refuses_large_graphs():
    g = AttributedGraph.from_edges(8, [(u, v) for u in range(8) for v in range(u + 1, 8)][:21])
    with pytest.raises(DataError, match="20"):
        exact_influence(g, [0], 0.5)


def test_distribution_sums_to_one_and_matches_expectation(triangle):
    q = influenced_set_distribution(triangle, [0], 0.3)
    assert sum(q.values()) == pytest.approx(1.0)
    assert all(0 in U for U in q)
    expected = sum(w * len(U) for U, w in q.items())
    assert expected == pytest.approx(exact_influence(triangle, [0], 0.3).total_count)


@pytest.mark.parametrize("seed", range(8))
def test_exact_matches_brute_force(seed):
    g = random_graph(seed, m_max=10)
    for p in (0.2, 0.7):
        assert exact_influence(g, [0], p).total_count == pytest.approx(brute_force_expected(g, [0], p))


def _report(fa, fb):
    return InfluenceReport(10, (0,), 0.1, 1, 0, 0.0, {"g": (fa * 5, fb * 5)}, {"g": (5, 5)})


def test_disparity_examples():
    assert disparity(_report(0.4, 0.4), "g") == 0
    assert disparity(_report(0.6, 0.1), "g") == pytest.approx(0.5)


def test_disparity_empty_group():
    rep = InfluenceReport(3, (0,), 0.1, 1, 0, 1.0, {"g": (1.0, 0.0)}, {"g": (3, 0)})
    with pytest.raises(DataError):
        disparity(rep, "g")


def test_mirrored_cliques_zero_disparity():
    k3 = [(0, 1), (0, 2), (1, 2)]
    g = labelled(6, k3 + [(u + 3, v + 3) for u, v in k3], [0, 1, 2])
    assert disparity(exact_influence(g, [0, 3], 0.5), "group") == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_coupled_monotonicity(seed):
    g = random_graph(seed, n_max=10, m_max=20)
    for sub in range(20):
        small = simulate_once(g, [0], 0.5, sub)
        big = simulate_once(g, [0, g.n - 1], 0.5, sub)
        assert {0} <= small <= big


def test_group_decomposition_per_rollout():
    g = random_graph(3, n_max=10, m_max=20)
    counts = rollout_counts(g, [0, 1], 0.4, rollout_sub_seeds(5, 200), ["group"])
    assert np.array_equal(counts[:, 0], counts[:, 1] + counts[:, 2])


def test_rollout_order_invariance(triangle):
    sub = rollout_sub_seeds(11, 300)
    a = rollout_counts(triangle, [0], 0.5, sub)
    b = rollout_counts(triangle, [0], 0.5, sub[::-1])
    assert np.array_equal(a, b[::-1])
    assert a[:, 0].mean() == b[:, 0].mean()


def test_fractions_include_seeds(path2):
    rep = estimate_influence(path2, [0], CascadeParams(0.0, 10, 0))
    assert rep.total_fraction == 0.5
    assert rep.per_group_fraction["group"] == (1.0, 0.0)
    assert rep.to_dict()["seeds_counted_as_influenced"] is True
