"""Compiled and pure-Python kernels must agree exactly."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from subnav import _pykernels, kernels
from subnav.graph import from_edges
from subnav.problems import _forward_csr, _reverse_csr, with_cascade_weights

impls = kernels.backends()
needs_cython = pytest.mark.skipif("cython" not in impls, reason="compiled extension not built")


def test_uniform_range_and_spread():
    key = _pykernels.stream_key(3, 11)
    u = np.array([_pykernels.uniform(key, i) for i in range(20_000)])
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 4 * np.sqrt(1 / 12 / len(u))
    assert _pykernels.uniform(key, 5) == _pykernels.uniform(key, 5)
    assert _pykernels.stream_key(3, 11) != _pykernels.stream_key(3, 12)


def test_backend_reported():
    assert kernels.BACKEND in impls


edge_lists = st.lists(st.tuples(st.integers(0, 14), st.integers(0, 14)), min_size=1, max_size=50).map(
    lambda es: [(u, v) for u, v in es if u != v] or [(0, 1)])


@needs_cython
@settings(max_examples=30, deadline=None)
@given(edge_lists, st.booleans(), st.integers(0, 2**63 - 1))
def test_ic_and_rr_identical(edges, directed, seed):
    g = with_cascade_weights(from_edges(edges, directed=directed))
    py, cy = impls["python"], impls["cython"]
    fwd = _forward_csr(g)
    seeds = np.array([0], dtype=np.int64)
    assert np.array_equal(py.ic_spreads(*fwd, seeds, 3, 40, seed), cy.ic_spreads(*fwd, seeds, 3, 40, seed))
    rev = _reverse_csr(g)
    for a, b in zip(py.rr_sets(*rev, 0, 60, seed), cy.rr_sets(*rev, 0, 60, seed)):
        assert np.array_equal(a, b)


@needs_cython
@settings(max_examples=30, deadline=None)
@given(edge_lists, st.integers(0, 6))
def test_greedy_cover_identical(edges, b):
    g = from_edges(edges)
    b = min(b, g.n)
    elem_indptr = np.arange(0, 2 * g.n_edges + 1, 2, dtype=np.int64)
    elem_sets = np.empty(2 * g.n_edges, dtype=np.int64)
    elem_sets[0::2], elem_sets[1::2] = g.src, g.dst
    args = (g.inc_indptr, g.inc_eids, elem_indptr, elem_sets, b)
    pc, pn = impls["python"].greedy_max_coverage(*args)
    cc, cn = impls["cython"].greedy_max_coverage(*args)
    assert list(pc) == list(cc) and pn == cn


def test_simulation_chunks_are_order_independent():
    g = with_cascade_weights(from_edges([(i, i + 1) for i in range(10)] + [(0, 5), (3, 8)]))
    fwd = _forward_csr(g)
    seeds = np.array([0], dtype=np.int64)
    whole = kernels.ic_spreads(*fwd, seeds, 0, 100, 9)
    parts = np.concatenate([kernels.ic_spreads(*fwd, seeds, a, b, 9) for a, b in ((0, 37), (37, 100))])
    assert np.array_equal(whole, parts)
