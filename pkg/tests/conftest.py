import sys

import numpy as np
import pytest

from tailmst.graph import Tree


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def star(n, weight=1.0):
    return Tree([f"n{i}" for i in range(n)], [(0, i, weight) for i in range(1, n)])


def path(n, weight=1.0):
    return Tree([f"n{i}" for i in range(n)], [(i, i + 1, weight) for i in range(n - 1)])


def random_tree(k, rng):
    """Uniform random labelled tree (decoded Pruefer sequence) with random weights."""
    if k == 2:
        return Tree(["n0", "n1"], [(0, 1, float(rng.uniform(0.1, 1.4)))])
    seq = list(rng.integers(0, k, size=k - 2))
    return Tree([f"n{i}" for i in range(k)],
                [(i, j, float(rng.uniform(0.1, 1.4))) for i, j in prufer_edges(seq, k)])


def prufer_edges(seq, k):
    degree = [1] * k
    for s in seq:
        degree[s] += 1
    edges = []
    for s in seq:
        leaf = min(i for i in range(k) if degree[i] == 1)
        edges.append((leaf, s))
        degree[leaf] -= 1
        degree[s] -= 1
    u, v = [i for i in range(k) if degree[i] == 1]
    edges.append((u, v))
    return edges


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance PASS/FAIL lines after the run, one per criterion."""
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULT_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
