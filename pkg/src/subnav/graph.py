"""Graph storage, SNAP edge-list loading, edge splitting and vertex features."""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)


class GraphParseError(ValueError):
    """Malformed edge-list input."""


class GraphValidationError(ValueError):
    """Structurally valid input that violates a graph invariant."""


class SplitError(RuntimeError):
    """An edge split left one side empty."""


def _csr(rows, cols, payload, n):
    order = np.lexsort((cols, rows))
    rows, cols, payload = rows[order], cols[order], payload[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    return np.cumsum(indptr), cols.astype(np.int64), payload.astype(np.int64)


class Graph:
    """Immutable weighted graph over dense vertex ids ``0..n-1``.

    ``labels[i]`` is the original id of dense vertex ``i``. Subgraphs produced
    by :func:`subnav.env.induce_subgraph` also carry ``parent_index``, the dense
    id of each vertex in the host graph.
    """

    def __init__(self, n, src, dst, weight=None, directed=False, weighted=False,
                 labels=None, parent_index=None):
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if weight is None:
            weight = np.ones(len(src), dtype=np.float64)
        weight = np.asarray(weight, dtype=np.float64)
        if not (len(src) == len(dst) == len(weight)):
            raise GraphValidationError("edge arrays differ in length")
        if len(src) and (src.min() < 0 or dst.min() < 0 or max(src.max(), dst.max()) >= n):
            raise GraphValidationError("edge references a vertex outside 0..n-1")
        if np.any(src == dst):
            raise GraphValidationError("self-loops are not allowed")
        if np.any(weight < 0) or not np.all(np.isfinite(weight)):
            raise GraphValidationError("edge weights must be finite and nonnegative")
        self.n = int(n)
        self.directed = bool(directed)
        self.weighted = bool(weighted)
        self.src, self.dst, self.weight = src, dst, weight
        self.labels = np.arange(n, dtype=np.int64) if labels is None else np.asarray(labels, dtype=np.int64)
        self.parent_index = None if parent_index is None else np.asarray(parent_index, dtype=np.int64)
        for arr in (self.src, self.dst, self.weight, self.labels):
            arr.setflags(write=False)

        m = len(src)
        eids = np.arange(m, dtype=np.int64)
        # union neighbourhood with incident edge ids (both directions, sorted by neighbour)
        self.inc_indptr, self.inc_nbrs, self.inc_eids = _csr(
            np.concatenate([src, dst]), np.concatenate([dst, src]), np.concatenate([eids, eids]), n)
        nb_rows = np.repeat(np.arange(n), np.diff(self.inc_indptr))
        keep = np.ones(len(self.inc_nbrs), dtype=bool)
        if len(keep):
            keep[1:] = (self.inc_nbrs[1:] != self.inc_nbrs[:-1]) | (nb_rows[1:] != nb_rows[:-1])
        self.nbr_indices = self.inc_nbrs[keep]
        self.nbr_indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(self.nbr_indptr, nb_rows[keep] + 1, 1)
        self.nbr_indptr = np.cumsum(self.nbr_indptr)

    # -- basic queries -------------------------------------------------
    @property
    def n_edges(self):
        return len(self.src)

    def degree(self):
        """Number of distinct neighbours per vertex (in/out union when directed)."""
        return np.diff(self.nbr_indptr)

    def out_degree(self):
        return np.bincount(self.src, minlength=self.n) + (0 if self.directed else np.bincount(self.dst, minlength=self.n))

    def in_degree(self):
        return np.bincount(self.dst, minlength=self.n) + (0 if self.directed else np.bincount(self.src, minlength=self.n))

    def neighbors(self, v):
        """Sorted, duplicate-free neighbours of ``v``."""
        if not 0 <= v < self.n:
            raise KeyError(f"unknown vertex {v}")
        return self.nbr_indices[self.nbr_indptr[v]:self.nbr_indptr[v + 1]]

    def incident_edges(self, v):
        return self.inc_eids[self.inc_indptr[v]:self.inc_indptr[v + 1]]

    def index_of(self, label):
        """Dense id of an original vertex id."""
        if not hasattr(self, "_label_index"):
            self._label_index = {int(l): i for i, l in enumerate(self.labels)}
        try:
            return self._label_index[int(label)]
        except KeyError:
            raise KeyError(f"unknown vertex id {label}") from None

    def arcs(self):
        """Directed arc view ``(tail, head, weight, arc_id)``.

        Undirected edge ``e`` becomes arcs ``2e`` (src->dst) and ``2e+1`` (dst->src).
        """
        if self.directed:
            return self.src, self.dst, self.weight, np.arange(self.n_edges, dtype=np.int64)
        m = self.n_edges
        ids = np.arange(m, dtype=np.int64)
        return (np.concatenate([self.src, self.dst]), np.concatenate([self.dst, self.src]),
                np.concatenate([self.weight, self.weight]), np.concatenate([2 * ids, 2 * ids + 1]))

    def edge_index(self):
        """Symmetric message-passing pairs ``(2, 2*|union edges|)`` from the neighbour CSR."""
        rows = np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.nbr_indptr))
        return np.vstack([rows, self.nbr_indices])

    def adjacency(self):
        """Symmetric 0/1 scipy CSR adjacency of the underlying undirected graph."""
        rows = np.repeat(np.arange(self.n), np.diff(self.nbr_indptr))
        data = np.ones(len(rows))
        return sp.csr_matrix((data, (rows, self.nbr_indices)), shape=(self.n, self.n))

    def edge_set(self, labelled=False):
        ids = self.labels if labelled else np.arange(self.n)
        s, d = ids[self.src], ids[self.dst]
        if self.directed:
            return set(zip(s.tolist(), d.tolist()))
        return {(min(a, b), max(a, b)) for a, b in zip(s.tolist(), d.tolist())}

    def __repr__(self):
        kind = "directed" if self.directed else "undirected"
        return f"Graph({kind}, n={self.n}, m={self.n_edges}, weighted={self.weighted})"


def from_edges(edges, directed=False, weighted=False):
    """Build a graph from ``(u, v)`` or ``(u, v, w)`` tuples of original ids.

    Dense ids follow first appearance; duplicates keep the first weight.
    """
    index = {}
    src, dst, w = [], [], []
    seen = set()
    for e in edges:
        u, v = int(e[0]), int(e[1])
        wt = float(e[2]) if len(e) > 2 else 1.0
        if u == v:
            continue
        key = (u, v) if directed else (min(u, v), max(u, v))
        if key in seen:
            continue
        seen.add(key)
        for x in (u, v):
            if x not in index:
                index[x] = len(index)
        src.append(index[u])
        dst.append(index[v])
        w.append(wt)
    labels = np.fromiter(index.keys(), dtype=np.int64, count=len(index))
    return Graph(len(index), src, dst, w, directed=directed, weighted=weighted, labels=labels)


def load_edge_list(path, directed=False, weighted=False):
    """Read a SNAP-style edge list (``u v`` or ``u v w`` per line, ``#`` comments)."""
    edges = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) not in (2, 3):
                raise GraphParseError(f"{path}:{lineno}: expected 'u v' or 'u v w', got {line!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
                wt = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError:
                raise GraphParseError(f"{path}:{lineno}: non-numeric field in {line!r}") from None
            if wt < 0:
                raise GraphValidationError(f"{path}:{lineno}: negative weight {wt}")
            if len(parts) == 3 and not weighted:
                wt = 1.0
            edges.append((u, v, wt))
    return from_edges(edges, directed=directed, weighted=weighted)


def write_edge_list(g, path, idmap=True):
    """Write ``g`` with original ids; optionally a ``<path>.idmap.json`` sidecar."""
    path = Path(path)
    with open(path, "w") as fh:
        kind = "directed" if g.directed else "undirected"
        fh.write(f"# {kind} n={g.n} m={g.n_edges}\n")
        for s, d, w in zip(g.labels[g.src].tolist(), g.labels[g.dst].tolist(), g.weight.tolist()):
            fh.write(f"{s} {d} {w!r}\n" if g.weighted else f"{s} {d}\n")
    if idmap:
        write_idmap(g, path.with_name(path.name + ".idmap.json"))


def write_idmap(g, path):
    with open(path, "w") as fh:
        json.dump({str(int(l)): i for i, l in enumerate(g.labels)}, fh, indent=0, sort_keys=False)


def split_edges(g, train_fraction, seed):
    """Assign each edge to train w.p. ``train_fraction`` (independent Bernoulli)."""
    if g.n_edges == 0:
        raise SplitError("cannot split an empty graph")
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    to_train = rng.random(g.n_edges) < train_fraction
    sides = []
    for mask in (to_train, ~to_train):
        if not mask.any():
            raise SplitError("split produced an empty side; retry with another seed")
        sides.append(edge_subgraph(g, np.flatnonzero(mask)))
    return sides[0], sides[1]


def edge_subgraph(g, eids):
    """Graph on the given edges; its vertices are exactly their endpoints."""
    eids = np.asarray(eids, dtype=np.int64)
    verts = np.unique(np.concatenate([g.src[eids], g.dst[eids]]))
    remap = np.full(g.n, -1, dtype=np.int64)
    remap[verts] = np.arange(len(verts))
    parent = verts if g.parent_index is None else g.parent_index[verts]
    return Graph(len(verts), remap[g.src[eids]], remap[g.dst[eids]], g.weight[eids],
                 directed=g.directed, weighted=g.weighted, labels=g.labels[verts], parent_index=parent)


def vertex_subgraph(g, keep):
    """Vertex-induced subgraph on the dense ids ``keep``."""
    keep = np.unique(np.asarray(keep, dtype=np.int64))
    mask = np.zeros(g.n, dtype=bool)
    mask[keep] = True
    eids = np.flatnonzero(mask[g.src] & mask[g.dst])
    remap = np.full(g.n, -1, dtype=np.int64)
    remap[keep] = np.arange(len(keep))
    return Graph(len(keep), remap[g.src[eids]], remap[g.dst[eids]], g.weight[eids],
                 directed=g.directed, weighted=g.weighted, labels=g.labels[keep], parent_index=keep)


def eigenvector_centrality(g, tol=1e-10, max_iter=1000):
    """Principal eigenvector of the undirected adjacency by shifted power iteration.

    Iterates ``x <- (A + I) x / ||(A + I) x||``; the shift keeps bipartite graphs
    (stars, paths) from oscillating. Returns ``(scores, converged)``.
    """
    if g.n == 0:
        return np.zeros(0), True
    a = g.adjacency()
    x = np.full(g.n, 1.0 / np.sqrt(g.n))
    for _ in range(max_iter):
        y = a @ x + x
        y /= np.linalg.norm(y)
        if np.max(np.abs(y - x)) < tol:
            return y, True
        x = y
    log.warning("eigenvector centrality hit max_iter=%d without reaching tol=%g", max_iter, tol)
    return x, False


@dataclass(frozen=True)
class FeatureTable:
    """Per-vertex raw features, min-max scaled; ``mins``/``maxs`` are the fit stats."""

    values: np.ndarray
    mins: np.ndarray
    maxs: np.ndarray
    columns: tuple = field(default=("degree", "eigenvector"))

    @property
    def width(self):
        return self.values.shape[1]


def raw_features(g, problem):
    from .problems import cascade_probabilities, problem_name

    cols = [g.degree().astype(np.float64), eigenvector_centrality(g)[0]]
    names = ["degree", "eigenvector"]
    if problem_name(problem) == "IM":
        tails, _, _, _ = g.arcs()
        cols.append(np.bincount(tails, weights=cascade_probabilities(g), minlength=g.n))
        names.append("out_weight")
    return np.column_stack(cols), tuple(names)


def compute_features(g, problem, stats=None):
    """Min-max scaled features; ``stats=(mins, maxs)`` reuses another graph's fit."""
    raw, names = raw_features(g, problem)
    if stats is None:
        mins, maxs = raw.min(axis=0), raw.max(axis=0)
    else:
        mins, maxs = (np.asarray(s, dtype=np.float64) for s in stats)
    span = maxs - mins
    values = np.zeros_like(raw)
    for j in range(raw.shape[1]):
        if span[j] <= 0:
            warnings.warn(f"feature column {names[j]!r} is constant; set to 0", RuntimeWarning, stacklevel=2)
        else:
            values[:, j] = (raw[:, j] - mins[j]) / span[j]
    values.setflags(write=False)
    return FeatureTable(values, mins, maxs, names)
