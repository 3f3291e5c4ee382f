"""Reference solvers H(G), the brute-force oracle and the pruning ratio."""
from __future__ import annotations

import itertools
from math import comb

import numpy as np

from . import kernels
from .problems import (Solution, _reverse_csr, bmc_cut_value, ic_spread_exact, mvc_coverage,
                       objective, problem_name)


class BudgetError(ValueError):
    pass


def _check_budget(g, b):
    if b < 0 or b > g.n:
        raise BudgetError(f"budget {b} outside 0..{g.n}")


def greedy_mvc(g, b):
    """Greedy max coverage: each step adds the vertex covering most uncovered edges."""
    _check_budget(g, b)
    elem_indptr = np.arange(0, 2 * g.n_edges + 1, 2, dtype=np.int64)
    elem_sets = np.empty(2 * g.n_edges, dtype=np.int64)
    elem_sets[0::2], elem_sets[1::2] = g.src, g.dst
    chosen, covered = kernels.greedy_max_coverage(g.inc_indptr, g.inc_eids, elem_indptr, elem_sets, b)
    score = covered / g.n_edges if g.n_edges else 0.0
    return Solution([int(v) for v in chosen], score, b, solver="greedy_mvc")


def greedy_bmc(g, b):
    """Marginal-gain greedy for budgeted max cut; always spends the full budget."""
    _check_budget(g, b)
    gain = np.diff(g.inc_indptr).astype(np.float64)
    in_x = np.zeros(g.n, dtype=bool)
    picks = []
    for _ in range(b):
        cand = np.where(in_x, -np.inf, gain)
        v = int(np.argmax(cand))
        picks.append(v)
        in_x[v] = True
        nbrs = g.inc_nbrs[g.inc_indptr[v]:g.inc_indptr[v + 1]]
        np.subtract.at(gain, nbrs, 2.0)
    return Solution(picks, float(bmc_cut_value(g, picks)), b, solver="greedy_bmc")


def default_n_rr(g):
    return int(min(100_000, max(2_000, 20 * g.n)))


def rr_collection(g, n_rr, seed):
    indptr, tails, arc_ids, probs = _reverse_csr(g)
    return kernels.rr_sets(indptr, tails, arc_ids, probs, 0, n_rr, seed)


def ris_im(g, b, n_rr=None, seed=0):
    """Reverse-reachable-set greedy for influence maximization.

    Score is the covered fraction of RR sets times ``|V|``.
    """
    _check_budget(g, b)
    n_rr = default_n_rr(g) if n_rr is None else int(n_rr)
    if n_rr < 1:
        raise ValueError("n_rr must be >= 1")
    ptr, members = rr_collection(g, n_rr, seed)
    rr_of = np.repeat(np.arange(n_rr, dtype=np.int64), np.diff(ptr))
    order = np.lexsort((rr_of, members))
    set_indptr = np.concatenate([[0], np.cumsum(np.bincount(members, minlength=g.n))]).astype(np.int64)
    chosen, covered = kernels.greedy_max_coverage(set_indptr, rr_of[order].copy(), ptr, members, b)
    return Solution([int(v) for v in chosen], covered / n_rr * g.n, b, solver="ris_im", seed=seed,
                    extra={"n_rr": n_rr})


def solve(problem, g, b, seed=0, n_rr=None):
    name = problem_name(problem)
    if name == "MVC":
        return greedy_mvc(g, b)
    if name == "BMC":
        return greedy_bmc(g, b)
    return ris_im(g, b, n_rr=n_rr, seed=seed)


def brute_force(problem, g, b, limit=1_000_000):
    """Exact argmax over all size-``b`` subsets; ties go to the lexicographically smallest."""
    _check_budget(g, b)
    if comb(g.n, b) > limit:
        raise ValueError(f"C({g.n}, {b}) exceeds the brute-force limit {limit}")
    name = problem_name(problem)
    if name == "MVC":
        f = lambda X: mvc_coverage(g, X)  # noqa: E731
    elif name == "BMC":
        f = lambda X: float(bmc_cut_value(g, X))  # noqa: E731
    else:
        f = lambda X: ic_spread_exact(g, X)  # noqa: E731
    best, best_score = None, -np.inf
    for X in itertools.combinations(range(g.n), b):
        s = f(X)
        if s > best_score + 1e-12:
            best, best_score = X, s
    return Solution(list(best), best_score, b, solver="brute_force")


def solution_ratio(sub_score, full_score):
    """Pruned-graph score over full-graph score; values above 1 are legal."""
    if full_score <= 0:
        raise ValueError("full-graph score must be positive")
    return sub_score / full_score


def lift(sub, vertices):
    """Map dense ids of a subgraph back to dense ids of its host."""
    if sub.parent_index is None:
        return [int(v) for v in vertices]
    return [int(sub.parent_index[v]) for v in vertices]


def score_on_host(problem, host, sub, b, seed=0, n_rr=None, eval_seed=None):
    """Run the solver on ``sub`` and score its solution on ``host``."""
    sol = solve(problem, sub, b, seed=seed, n_rr=n_rr)
    picked = lift(sub, sol.vertices)
    return objective(problem, host, picked, seed=eval_seed), picked


# -- stochastic solvers used to fit the rank-interpolation baseline --------------

def probabilistic_greedy_mvc(g, b, rng, top=3):
    """Each step picks uniformly among the ``top`` best marginal-gain vertices."""
    _check_budget(g, b)
    gain = np.diff(g.inc_indptr).astype(np.float64)
    covered = np.zeros(g.n_edges, dtype=bool)
    in_x = np.zeros(g.n, dtype=bool)
    picks = []
    for _ in range(b):
        cand = np.where(in_x, -np.inf, gain)
        k = min(top, g.n - len(picks))
        best = np.lexsort((np.arange(g.n), -cand))[:k]
        v = int(best[rng.integers(k)])
        picks.append(v)
        in_x[v] = True
        eids = g.incident_edges(v)
        new = eids[~covered[eids]]
        covered[new] = True
        np.subtract.at(gain, g.src[new], 1.0)
        np.subtract.at(gain, g.dst[new], 1.0)
    return Solution(picks, mvc_coverage(g, picks) if g.n_edges else 0.0, b, solver="probabilistic_greedy_mvc")


def softmax_greedy_bmc(g, b, rng, temperature=1.0):
    """Each step samples a vertex with probability softmax(marginal cut gain / temperature)."""
    _check_budget(g, b)
    gain = np.diff(g.inc_indptr).astype(np.float64)
    in_x = np.zeros(g.n, dtype=bool)
    picks = []
    for _ in range(b):
        logits = np.where(in_x, -np.inf, gain / temperature)
        p = np.exp(logits - logits.max())
        p /= p.sum()
        v = int(rng.choice(g.n, p=p))
        picks.append(v)
        in_x[v] = True
        np.subtract.at(gain, g.inc_nbrs[g.inc_indptr[v]:g.inc_indptr[v + 1]], 2.0)
    return Solution(picks, float(bmc_cut_value(g, picks)), b, solver="softmax_greedy_bmc")


def stochastic_solve(problem, g, b, seed, n_rr=None):
    name = problem_name(problem)
    rng = np.random.default_rng(seed)
    if name == "MVC":
        return probabilistic_greedy_mvc(g, b, rng)
    if name == "BMC":
        return softmax_greedy_bmc(g, b, rng)
    return ris_im(g, b, n_rr=n_rr, seed=seed)
