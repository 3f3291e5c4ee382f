"""Subgraph navigation MDP: subgraph induction, action sampling, transitions and reward."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .graph import Graph


class DeadStateError(RuntimeError):
    """No vertex in X has a neighbour outside X."""


class ActionTuple(NamedTuple):
    out_vertex: int
    in_vertex: int


@dataclass(frozen=True)
class GoalPoint:
    g_star: np.ndarray
    beta: float = 1.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not np.all(np.isfinite(self.g_star)):
            raise ValueError("goal has non-finite entries")

    def distance(self, embedding):
        embedding = np.asarray(embedding, dtype=np.float64)
        if embedding.shape != np.shape(self.g_star):
            raise ValueError(f"embedding shape {embedding.shape} != goal shape {np.shape(self.g_star)}")
        return float(np.linalg.norm(self.g_star - embedding))


def _segments(indptr, rows):
    """Concatenated CSR slices for ``rows`` plus the row position of every entry."""
    starts, stops = indptr[rows], indptr[rows + 1]
    lens = stops - starts
    seg = np.repeat(np.arange(len(rows)), lens)
    offs = np.arange(lens.sum()) - np.repeat(np.cumsum(lens) - lens, lens)
    return starts[seg] + offs, seg, lens


def induce_subgraph(g: Graph, X) -> Graph:
    """X, its one-hop neighbours, and every edge with an endpoint in X."""
    X = np.unique(np.asarray(X, dtype=np.int64))
    if len(X) == 0:
        raise ValueError("cannot induce a subgraph from an empty vertex set")
    pos, _, _ = _segments(g.inc_indptr, X)
    eids = np.unique(g.inc_eids[pos])
    verts = np.union1d(X, np.concatenate([g.src[eids], g.dst[eids]]))
    remap = np.full(g.n, -1, dtype=np.int64)
    remap[verts] = np.arange(len(verts))
    return Graph(len(verts), remap[g.src[eids]], remap[g.dst[eids]], g.weight[eids],
                 directed=g.directed, weighted=g.weighted, labels=g.labels[verts], parent_index=verts)


def sample_actions(g: Graph, X, B=None, seed=None):
    """One uniformly drawn outside neighbour per vertex of X.

    Returns ``(A, B_t)``; ``B_t`` holds the tuples whose incoming vertex is in ``B``.
    """
    rng = np.random.default_rng(seed)
    X = np.unique(np.asarray(X, dtype=np.int64))
    in_x = np.zeros(g.n, dtype=bool)
    in_x[X] = True
    pos, seg, _ = _segments(g.nbr_indptr, X)
    nbrs = g.nbr_indices[pos]
    outside = ~in_x[nbrs]
    nbrs, seg = nbrs[outside], seg[outside]
    counts = np.bincount(seg, minlength=len(X))
    first = np.cumsum(counts) - counts
    draws = rng.random(len(X))
    A = []
    for i in np.flatnonzero(counts):
        u = nbrs[first[i] + min(int(draws[i] * counts[i]), counts[i] - 1)]
        A.append(ActionTuple(int(X[i]), int(u)))
    if not A:
        raise DeadStateError("every neighbourhood of X lies inside X")
    if B is None:
        return A, []
    bset = set(int(b) for b in B)
    return A, [a for a in A if a.in_vertex in bset]


def apply_action(X, a: ActionTuple):
    X = np.asarray(X, dtype=np.int64)
    v, u = a
    if v == u or u in X or v not in X:
        raise RuntimeError(f"action {a} is not valid for the current vertex set")
    out = X.copy()
    out[out == v] = u
    out.sort()
    return out


def reward(goal: GoalPoint, next_embedding):
    """Negative scaled distance to the goal."""
    return -goal.beta * goal.distance(next_embedding)


@dataclass
class NavState:
    X: np.ndarray
    subgraph: Graph
    embedding: np.ndarray
    vertex_embeddings: np.ndarray | None
    t: int = 0

    def vertex_row(self, host_vertex):
        """Row of ``vertex_embeddings`` for a host vertex of the subgraph."""
        return int(np.searchsorted(self.subgraph.parent_index, host_vertex))


Embedder = Callable[[Graph], tuple]


class SubgraphEnv:
    """Navigation environment over a host graph.

    ``embed(sub)`` must return ``(embedding, vertex_embeddings)``; the second
    may be ``None`` when no agent needs per-vertex inputs.
    """

    def __init__(self, g: Graph, M: int, embed: Embedder, goal: GoalPoint, solution=None):
        if M > g.n:
            raise ValueError(f"M={M} exceeds |V|={g.n}")
        self.g, self.M, self.embed, self.goal = g, M, embed, goal
        self.solution = None if solution is None else [int(b) for b in solution]

    def make_state(self, X, t=0):
        sub = induce_subgraph(self.g, X)
        emb, vemb = self.embed(sub)
        return NavState(np.asarray(X, dtype=np.int64), sub, np.asarray(emb, dtype=np.float64), vemb, t)

    def reset(self, rng):
        X = np.sort(rng.choice(self.g.n, size=self.M, replace=False))
        return self.make_state(X)

    def candidates(self, state, rng):
        return sample_actions(self.g, state.X, self.solution, rng)

    def step(self, state, action):
        nxt = self.make_state(apply_action(state.X, action), state.t + 1)
        return nxt, reward(self.goal, nxt.embedding)

    def distance(self, state):
        return self.goal.distance(state.embedding)


@dataclass
class Trajectory:
    Xs: list
    actions: list
    rewards: list
    distances: list
    embeddings: list
    complete: bool = True
    best_index: int = 0
    best_state: NavState | None = field(default=None, repr=False)

    def to_jsonl(self, path, labels, beta=1.0):
        with open(path, "a") as fh:
            for t, X in enumerate(self.Xs):
                fh.write(json.dumps({
                    "t": t,
                    "X": [int(labels[v]) for v in X],
                    "embedding": [float(x) for x in self.embeddings[t]],
                    "reward": None if t == 0 else float(self.rewards[t - 1]),
                    "goal_distance": float(beta * self.distances[t]),
                }) + "\n")


def rollout(env: SubgraphEnv, policy, T: int, seed=None, X0=None, keep_states=False):
    """Run ``T`` transitions from a uniform random (or given) X0.

    ``policy(state, A, B_t, rng)`` returns an action. The best state is the one
    closest to the goal; a dead state ends the episode early (``complete=False``).
    """
    rng = np.random.default_rng(seed)
    state = env.reset(rng) if X0 is None else env.make_state(np.sort(np.asarray(X0)))
    traj = Trajectory([state.X], [], [], [env.distance(state)], [state.embedding])
    best, best_d = state, traj.distances[0]
    states = [state] if keep_states else None
    for _ in range(T):
        try:
            A, Bt = env.candidates(state, rng)
        except DeadStateError:
            traj.complete = False
            break
        a = policy(state, A, Bt, rng)
        state, r = env.step(state, a)
        d = env.distance(state)
        traj.Xs.append(state.X)
        traj.actions.append(a)
        traj.rewards.append(r)
        traj.distances.append(d)
        traj.embeddings.append(state.embedding)
        if keep_states:
            states.append(state)
        if d < best_d:
            best, best_d, traj.best_index = state, d, len(traj.Xs) - 1
    traj.best_state = best
    if keep_states:
        traj.states = states
    return traj
