import numpy as np
import pytest

from fairim.graph import AttributedGraph
from fairim.rng import SplitMix64


def random_graph(seed, n_max=8, m_max=12, attr="group", n_min=2):
    """Random simple graph with a binary attribute whose groups are both non-empty."""
    rng = SplitMix64(seed)
    n = n_min + rng.randbelow(n_max - n_min + 1)
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    rng.shuffle(pairs)
    m = rng.randbelow(min(m_max, len(pairs)) + 1)
    is_a = np.array([rng.random() < 0.5 for _ in range(n)])
    is_a[0], is_a[-1] = True, False
    return AttributedGraph.from_edges(n, pairs[:m]).with_labels(attr, is_a)


def labelled(n, edges, a_nodes, attr="group"):
    is_a = np.zeros(n, dtype=bool)
    is_a[list(a_nodes)] = True
    return AttributedGraph.from_edges(n, edges).with_labels(attr, is_a)


@pytest.fixture
def path2():
    return labelled(2, [(0, 1)], [0])


@pytest.fixture
def triangle():
    return labelled(3, [(0, 1), (1, 2), (0, 2)], [0])


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES = []


def record_acceptance(number, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
