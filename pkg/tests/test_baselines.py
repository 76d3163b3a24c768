import itertools

import numpy as np
import pytest

from conftest import labelled, random_graph
from fairim.baselines import (
    LiveEdgeSample,
    degree_seeds,
    greedy_by_score,
    greedy_celf,
    random_seeds,
)
from fairim.diffusion import CascadeParams, estimate_influence, exact_influence
from fairim.errors import ConfigError
from fairim.graph import AttributedGraph
from fairim.rng import SplitMix64


def star(k=5):
    return AttributedGraph.from_edges(k + 1, [(0, i) for i in range(1, k + 1)])


def test_star_picks_center():
    seeds, trace = greedy_celf(star(), 1.0, 1, rollouts=10)
    assert seeds.nodes == (0,)
    assert trace.gains == [6.0]


def test_two_triangles_one_each():
    tri = [(0, 1), (1, 2), (0, 2)]
    g = AttributedGraph.from_edges(6, tri + [(u + 3, v + 3) for u, v in tri])
    seeds, _ = greedy_celf(g, 1.0, 2, rollouts=10)
    assert sorted(u // 3 for u in seeds) == [0, 1]


@pytest.mark.parametrize("seed", range(10))
def test_exact_scoring_matches_brute_force_single_seed(seed):
    g = random_graph(seed, m_max=12)
    score = {u: exact_influence(g, [u], 0.4).total_count for u in range(g.n)}
    best = max(range(g.n), key=lambda u: (score[u], -u))
    assert greedy_by_score(g.n, 1, lambda s: exact_influence(g, s, 0.4).total_count) == [best]


@pytest.mark.parametrize("seed", range(10))
def test_lazy_equals_plain(seed):
    g = random_graph(seed, n_max=20, m_max=40)
    budget = min(4, g.n)
    lazy, _ = greedy_celf(g, 0.3, budget, rollouts=200, rng_seed=seed)
    plain, _ = greedy_celf(g, 0.3, budget, rollouts=200, rng_seed=seed, lazy=False)
    assert lazy.nodes == plain.nodes


def test_lazy_saves_evaluations():
    g = random_graph(4, n_max=20, m_max=40, n_min=20)
    _, trace = greedy_celf(g, 0.2, 5, rollouts=200)
    assert trace.evaluations[0] == g.n
    assert sum(trace.evaluations[1:]) < 4 * g.n


def test_gains_non_increasing_within_noise():
    g = random_graph(8, n_max=20, m_max=40, n_min=15)
    _, trace = greedy_celf(g, 0.3, 6, rollouts=500)
    for (a, b, se) in zip(trace.gains, trace.gains[1:], trace.gain_stderr[1:]):
        assert b <= a + 3 * se + 1e-12


def test_sample_influence_matches_gains():
    g = random_graph(2, n_max=12, m_max=20)
    sample = LiveEdgeSample(g, 0.5, 300, 1)
    seeds, trace = greedy_celf(g, 0.5, 3, rollouts=300, rng_seed=1)
    assert sum(trace.gains) == pytest.approx(sample.influence(seeds.nodes))


@pytest.mark.parametrize("seed", range(5))
def test_greedy_beats_random(seed):
    g = random_graph(seed, n_max=20, m_max=30, n_min=10)
    params = CascadeParams(0.3, 2000, 99)
    greedy = estimate_influence(g, greedy_celf(g, 0.3, 3, 500, seed)[0], params)
    rnd = estimate_influence(g, random_seeds(g, 3, seed), params)
    se = np.hypot(greedy.stderr["total_count"], rnd.stderr["total_count"])
    assert greedy.total_count >= rnd.total_count - 3 * se


def test_greedy_prefix_property():
    g = random_graph(1, n_max=20, m_max=40, n_min=15)
    big, _ = greedy_celf(g, 0.3, 6, 300, 5)
    small, _ = greedy_celf(g, 0.3, 3, 300, 5)
    assert big.nodes[:3] == small.nodes


def test_degree_examples():
    assert degree_seeds(star(), 1).nodes == (0,)
    cycle = AttributedGraph.from_edges(5, [(i, (i + 1) % 5) for i in range(5)])
    assert degree_seeds(cycle, 3).nodes == (0, 1, 2)
    assert sorted(degree_seeds(cycle, 5).nodes) == list(range(5))


def test_random_examples():
    g = star()
    assert sorted(random_seeds(g, 6, 1).nodes) == list(range(6))
    assert random_seeds(g, 3, 7) == random_seeds(g, 3, 7)


def test_random_uniformity():
    g = AttributedGraph.from_edges(4, [])
    rng = SplitMix64(0)
    counts = np.bincount([random_seeds(g, 1, rng.next_u64()).nodes[0] for _ in range(10_000)], minlength=4)
    sigma = np.sqrt(10_000 * 0.25 * 0.75)
    assert np.all(np.abs(counts - 2500) <= 4 * sigma)


def test_budget_checks():
    for fn in (lambda: greedy_celf(star(), 0.5, 7), lambda: degree_seeds(star(), 0), lambda: random_seeds(star(), 9, 0)):
        with pytest.raises(ConfigError):
            fn()
