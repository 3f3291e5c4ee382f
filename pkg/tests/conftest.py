import math

import networkx as nx
import numpy as np
import pytest

from subnav.graph import from_edges


def graph_of(edges, directed=False, weighted=False):
    return from_edges(edges, directed=directed, weighted=weighted)


def from_nx(h, directed=False):
    return from_edges(list(h.edges()), directed=directed)


def ba_graph(n, m, seed):
    return from_nx(nx.barabasi_albert_graph(n, m, seed=seed))


@pytest.fixture
def path3():
    return graph_of([(0, 1), (1, 2)])


@pytest.fixture
def path4():
    return graph_of([(0, 1), (1, 2), (2, 3)])


@pytest.fixture
def triangle():
    return graph_of([(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def star4():
    """K_{1,4} with centre 0 and leaves 1..4."""
    return graph_of([(0, i) for i in range(1, 5)])


@pytest.fixture
def k33():
    return graph_of([(a, b) for a in range(3) for b in range(3, 6)])


@pytest.fixture
def chain_half():
    return graph_of([(0, 1, 0.5), (1, 2, 0.5)], directed=True, weighted=True)


@pytest.fixture
def small_ba():
    return ba_graph(120, 3, seed=1)


def sigma_binomial(n, p):
    return math.sqrt(n * p * (1 - p))


def random_small_graph(rng, n_max=12, p=None):
    n = int(rng.integers(3, n_max + 1))
    p = rng.uniform(0.2, 0.7) if p is None else p
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
    if not edges:
        edges = [(0, 1)]
    return graph_of(edges)
