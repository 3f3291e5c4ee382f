"""Competing pruners: GNN vertex classifier (rank / threshold) and rank interpolation."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import torch
from torch.nn import functional as F

from .graph import vertex_subgraph
from .heuristics import stochastic_solve
from .nn import VertexClassifier, as_tensor, seeded

log = logging.getLogger(__name__)


class PruneError(RuntimeError):
    pass


@dataclass
class ClassifierConfig:
    hidden: int = 30
    lr: float = 1e-3
    epochs: int = 300


def classifier_inputs(g, features):
    return as_tensor(features.values), torch.as_tensor(g.edge_index())


def classifier_batch(n, solution, rng):
    """Solution vertices plus an equal number of sampled non-solution vertices."""
    B = np.asarray(solution, dtype=np.int64)
    pool = np.setdiff1d(np.arange(n), B)
    if len(B) > len(pool):
        raise ValueError(f"cannot sample {len(B)} non-solution vertices from {len(pool)}")
    neg = rng.choice(pool, size=len(B), replace=False)
    idx = np.concatenate([B, neg])
    return idx, np.concatenate([np.ones(len(B)), np.zeros(len(B))])


def classifier_loss(clf, x, ei, idx, y):
    return F.binary_cross_entropy_with_logits(clf(x, ei)[torch.as_tensor(idx)], as_tensor(y))


def train_vertex_classifier(g, features, solution, config=None, seed=0):
    """Returns ``(classifier, per-epoch losses)``; each epoch resamples the negatives."""
    config = config or ClassifierConfig()
    rng = np.random.default_rng(seed)
    with seeded(seed):
        clf = VertexClassifier(features.width, config.hidden)
    opt = torch.optim.Adam(clf.parameters(), lr=config.lr)
    x, ei = classifier_inputs(g, features)
    history = []
    for _ in range(config.epochs):
        idx, y = classifier_batch(g.n, solution, rng)
        loss = classifier_loss(clf, x, ei, idx, y)
        opt.zero_grad()
        loss.backward()
        opt.step()
        history.append(loss.item())
    clf.eval()
    return clf, history


def vertex_probabilities(clf, g, features):
    with torch.no_grad():
        return torch.sigmoid(clf(*classifier_inputs(g, features))).numpy()


def rank_keep(prob, keep_k):
    """Indices of the ``keep_k`` highest probabilities (ties: lowest id)."""
    return np.sort(np.lexsort((np.arange(len(prob)), -prob))[:keep_k])


def gnn_rank_prune(clf, g, features, keep_k):
    if keep_k < 1:
        raise PruneError("keep_k must be >= 1")
    return vertex_subgraph(g, rank_keep(vertex_probabilities(clf, g, features), min(keep_k, g.n)))


def gnn_threshold_prune(clf, g, features, threshold=0.5):
    keep = np.flatnonzero(vertex_probabilities(clf, g, features) >= threshold)
    if len(keep) == 0:
        raise PruneError("no vertex reaches the probability threshold")
    return vertex_subgraph(g, keep)


# -- rank interpolation ---------------------------------------------------------

def gcomb_rank(g):
    """1-based rank by descending out-weight (degree when unweighted); ties: lowest id."""
    if g.weighted:
        tails, _, w, _ = g.arcs()
        key = np.bincount(tails, weights=w, minlength=g.n)
    else:
        key = g.out_degree().astype(np.float64)
    order = np.lexsort((np.arange(g.n), -key))
    rank = np.empty(g.n, dtype=np.int64)
    rank[order] = np.arange(1, g.n + 1)
    return rank


@dataclass
class RankInterpolator:
    budgets: np.ndarray   # b' / |V|
    ranks: np.ndarray     # r_{b'} / |V|
    raw_ranks: np.ndarray

    def __call__(self, b_frac):
        lo, hi = self.budgets[0], self.budgets[-1]
        if b_frac < lo or b_frac > hi:
            warnings.warn(f"budget fraction {b_frac:.4g} outside fitted range [{lo:.4g}, {hi:.4g}]; clamped",
                          RuntimeWarning, stacklevel=2)
        return float(np.interp(b_frac, self.budgets, self.ranks))


def prefix_max_ranks(rank, solutions, b):
    """``r[b'-1]`` = max rank over the first ``b'`` picks of every solution."""
    r = np.zeros(b, dtype=np.int64)
    for sol in solutions:
        r = np.maximum(r, np.maximum.accumulate(rank[np.asarray(sol[:b])]))
    return r


def gcomb_fit(g, problem, b, L, seed=0, n_rr=None):
    if L < 1:
        raise ValueError("L must be >= 1")
    rank = gcomb_rank(g)
    seeds = np.random.SeedSequence(seed).generate_state(L)
    sols = [stochastic_solve(problem, g, b, int(s), n_rr=n_rr).vertices for s in seeds]
    r = prefix_max_ranks(rank, sols, b)
    return RankInterpolator(np.arange(1, b + 1) / g.n, r / g.n, r)


def gcomb_prune(interp, g, b_tilde):
    cutoff = g.n * interp(b_tilde / g.n)
    keep = np.flatnonzero(gcomb_rank(g) <= cutoff)
    if len(keep) == 0:
        raise PruneError("rank cutoff removes every vertex")
    return vertex_subgraph(g, keep)

