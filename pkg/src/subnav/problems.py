"""Objective functions for max vertex cover, budgeted max cut and influence maximization."""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels

PROBLEMS = ("MVC", "BMC", "IM")


@dataclass(frozen=True)
class ProblemKind:
    name: str
    n_sim: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.name not in PROBLEMS:
            raise ValueError(f"unknown problem {self.name!r}; expected one of {PROBLEMS}")
        if self.name == "IM" and self.n_sim < 1:
            raise ValueError("n_sim must be >= 1 for IM")


def problem_name(problem):
    return problem.name if isinstance(problem, ProblemKind) else str(problem)


@dataclass
class Solution:
    """Budget-``b`` vertex set in pick order (dense ids of the graph it was solved on)."""

    vertices: list
    score: float
    budget: int
    solver: str = ""
    seed: int | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.vertices) != self.budget:
            raise ValueError(f"solution has {len(self.vertices)} vertices, budget is {self.budget}")

    def to_json(self, g, problem):
        return {
            "problem": problem_name(problem),
            "budget": self.budget,
            "vertices": [int(g.labels[v]) for v in self.vertices],
            "score": float(self.score),
            "solver": self.solver,
            "seed": self.seed,
        }


def _as_index(X):
    return np.asarray(sorted(set(int(x) for x in X)), dtype=np.int64)


def mvc_coverage(g, X):
    """Fraction of edges with at least one endpoint in ``X``."""
    if g.n_edges == 0:
        raise ValueError("coverage undefined on a graph without edges")
    mask = np.zeros(g.n, dtype=bool)
    mask[_as_index(X)] = True
    return float(np.count_nonzero(mask[g.src] | mask[g.dst])) / g.n_edges


def bmc_cut_value(g, X):
    """Number of edges with exactly one endpoint in ``X`` (direction ignored)."""
    mask = np.zeros(g.n, dtype=bool)
    mask[_as_index(X)] = True
    return int(np.count_nonzero(mask[g.src] != mask[g.dst]))


def cascade_probabilities(g):
    """Per-arc activation probabilities aligned with :meth:`Graph.arcs`.

    Weighted graphs use their weights; unweighted graphs use the weighted-cascade
    rule ``p(u, v) = 1 / indegree(v)``.
    """
    tails, heads, w, _ = g.arcs()
    if g.weighted:
        if np.any(w > 1.0):
            raise ValueError("IC activation probabilities must lie in [0, 1]")
        return w.astype(np.float64)
    indeg = np.bincount(heads, minlength=g.n).astype(np.float64)
    return 1.0 / indeg[heads]


def with_cascade_weights(g):
    """Copy of ``g`` whose weights are its IC probabilities (directed arcs).

    Subgraphs of the result keep the host probabilities.
    """
    from .graph import Graph

    tails, heads, _, _ = g.arcs()
    return Graph(g.n, tails, heads, cascade_probabilities(g), directed=True, weighted=True,
                 labels=g.labels, parent_index=g.parent_index)


def _forward_csr(g):
    cached = getattr(g, "_ic_forward", None)
    if cached is None:
        tails, heads, _, arc_ids = g.arcs()
        probs = cascade_probabilities(g)
        order = np.lexsort((heads, tails))
        indptr = np.concatenate([[0], np.cumsum(np.bincount(tails, minlength=g.n))]).astype(np.int64)
        cached = (indptr, heads[order].astype(np.int64), arc_ids[order].astype(np.int64),
                  np.ascontiguousarray(probs[order]))
        g._ic_forward = cached
    return cached


def _reverse_csr(g):
    cached = getattr(g, "_ic_reverse", None)
    if cached is None:
        tails, heads, _, arc_ids = g.arcs()
        probs = cascade_probabilities(g)
        order = np.lexsort((tails, heads))
        indptr = np.concatenate([[0], np.cumsum(np.bincount(heads, minlength=g.n))]).astype(np.int64)
        cached = (indptr, tails[order].astype(np.int64), arc_ids[order].astype(np.int64),
                  np.ascontiguousarray(probs[order]))
        g._ic_reverse = cached
    return cached


def _chunks(total, jobs):
    jobs = max(1, min(jobs, total))
    bounds = np.linspace(0, total, jobs + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def ic_spreads(g, X, n_sim, seed, jobs=1):
    """Activated-set size of each of ``n_sim`` cascades; cascade ``i`` uses stream ``(seed, i)``."""
    cascade_probabilities(g)  # validates weights
    indptr, heads, arc_ids, probs = _forward_csr(g)
    seeds = _as_index(X)
    if jobs <= 1:
        return kernels.ic_spreads(indptr, heads, arc_ids, probs, seeds, 0, n_sim, seed)
    with ThreadPoolExecutor(jobs) as pool:
        parts = pool.map(lambda c: kernels.ic_spreads(indptr, heads, arc_ids, probs, seeds, c[0], c[1], seed),
                         _chunks(n_sim, jobs))
        return np.concatenate(list(parts))


def ic_spread_estimate(g, X, n_sim=1000, seed=0, jobs=1):
    """Monte Carlo mean spread of ``X`` under independent cascade."""
    if n_sim < 1:
        raise ValueError("n_sim must be >= 1")
    return float(np.mean(ic_spreads(g, X, n_sim, seed, jobs)))


def ic_spread_exact(g, X):
    """Exact expected spread by enumerating all live-arc realizations (``|arcs| <= 20``)."""
    tails, heads, _, _ = g.arcs()
    probs = cascade_probabilities(g)
    m = len(tails)
    if m > 20:
        raise ValueError(f"exact IC enumeration limited to 20 arcs, graph has {m}")
    seeds = _as_index(X)
    total = 0.0
    for live in itertools.product((False, True), repeat=m):
        live = np.array(live, dtype=bool)
        pr = float(np.prod(np.where(live, probs, 1.0 - probs)))
        if pr == 0.0:
            continue
        reached = np.zeros(g.n, dtype=bool)
        reached[seeds] = True
        stack = list(seeds)
        lt, lh = tails[live], heads[live]
        while stack:
            u = stack.pop()
            for v in lh[lt == u]:
                if not reached[v]:
                    reached[v] = True
                    stack.append(v)
        total += pr * reached.sum()
    return total


def objective(problem, g, X, seed=None, jobs=1):
    """Score ``X`` on ``g`` under ``problem`` (IM uses Monte Carlo with ``problem.n_sim``)."""
    name = problem_name(problem)
    if name == "MVC":
        return mvc_coverage(g, X)
    if name == "BMC":
        return float(bmc_cut_value(g, X))
    n_sim = problem.n_sim if isinstance(problem, ProblemKind) else 1000
    if seed is None:
        seed = problem.seed if isinstance(problem, ProblemKind) else 0
    return ic_spread_estimate(g, X, n_sim, seed, jobs)
