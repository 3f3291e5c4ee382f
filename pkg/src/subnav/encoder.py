"""Labelled subgraph datasets and contrastive training of the subgraph encoder."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .env import GoalPoint, induce_subgraph
from .heuristics import score_on_host, solution_ratio
from .nn import Encoder, as_tensor, info_nce, seeded

log = logging.getLogger(__name__)

THRESHOLDS = (0.95, 0.8, 0.6)


class GenerationError(RuntimeError):
    """A class quota could not be filled within the attempt budget."""


def label_map(ratio, K=4, thresholds=THRESHOLDS):
    """Class 1 on (0.95, inf), 2 on (0.8, 0.95], 3 on (0.6, 0.8], 4 on [0, 0.6].

    With ``K=3`` the last two bins merge into class 3.
    """
    if ratio < 0:
        raise ValueError("ratio must be nonnegative")
    for c, lo in enumerate(thresholds[:K - 1], start=1):
        if ratio > lo:
            return c
    return K


@dataclass
class LabeledSubgraph:
    X: np.ndarray
    ratio: float
    label: int
    subgraph: object = field(default=None, repr=False)


@dataclass
class SubgraphDataset:
    samples: list
    K: int
    M: int

    def labels(self):
        return np.array([s.label for s in self.samples])

    def class_counts(self):
        return np.bincount(self.labels(), minlength=self.K + 1)[1:]

    def save(self, path, host):
        with open(path, "w") as fh:
            fh.write(json.dumps({"K": self.K, "M": self.M}) + "\n")
            for s in self.samples:
                fh.write(json.dumps({"X": [int(host.labels[v]) for v in s.X], "ratio": float(s.ratio),
                                     "label": int(s.label)}) + "\n")

    @classmethod
    def load(cls, path, host):
        with open(path) as fh:
            head = json.loads(fh.readline())
            samples = []
            for line in fh:
                rec = json.loads(line)
                X = np.sort(np.array([host.index_of(v) for v in rec["X"]], dtype=np.int64))
                samples.append(LabeledSubgraph(X, rec["ratio"], rec["label"], induce_subgraph(host, X)))
        return cls(samples, head["K"], head["M"])


def generate_dataset(host, problem, solution, full_score, N, M, K=4, seed=0, b=None,
                     max_attempts=None, n_rr=None, phi=(1.0, 0.6, 0.3, 0.0)):
    """Balanced labelled subgraphs of ``host`` (N/K per class).

    For a target class ``c`` the sampler puts ``ceil(phi_c * b)`` solution vertices
    into X and fills the rest uniformly from non-solution vertices; ``phi_c`` is
    bisected on the observed labels. Every candidate is labelled by its true
    ratio and accepted only if its class still has room.
    """
    if N % K:
        raise ValueError(f"N={N} must be divisible by K={K}")
    rng = np.random.default_rng(seed)
    B = np.asarray(solution, dtype=np.int64)
    b = len(B) if b is None else b
    quota = N // K
    max_attempts = max_attempts or 50 * N
    others = np.setdiff1d(np.arange(host.n), B)
    if M > host.n:
        raise ValueError(f"M={M} exceeds |V|={host.n}")
    phi = list(phi[:K]) + [0.0] * max(0, K - len(phi))
    lo, hi = [0.0] * K, [1.0] * K
    samples, counts = [], np.zeros(K, dtype=int)
    for attempt in range(max_attempts):
        if counts.min() >= quota:
            break
        target = int(np.argmin(np.where(counts < quota, counts, np.iinfo(int).max)))
        n_sol = min(math.ceil(phi[target] * len(B)), M, len(B))
        picked = rng.choice(B, size=n_sol, replace=False) if n_sol else np.empty(0, dtype=np.int64)
        fill = rng.choice(others, size=M - n_sol, replace=False)
        X = np.sort(np.concatenate([picked, fill]).astype(np.int64))
        sub = induce_subgraph(host, X)
        score, _ = score_on_host(problem, host, sub, min(b, sub.n), seed=seed, n_rr=n_rr, eval_seed=seed)
        ratio = solution_ratio(score, full_score)
        label = label_map(ratio, K)
        if counts[label - 1] < quota:
            samples.append(LabeledSubgraph(X, ratio, label, sub))
            counts[label - 1] += 1
        # label above target = ratio too high -> fewer solution vertices
        if label < target + 1:
            hi[target] = phi[target]
        elif label > target + 1:
            lo[target] = phi[target]
        if label != target + 1:
            if hi[target] - lo[target] < 0.5 / max(len(B), 1):
                lo[target], hi[target] = 0.0, 1.0
            phi[target] = 0.5 * (lo[target] + hi[target])
    else:
        if counts.min() < quota:
            starving = int(np.argmin(counts)) + 1
            raise GenerationError(f"class {starving} got {counts.min()}/{quota} samples after "
                                  f"{max_attempts} attempts")
    order = np.argsort([s.label for s in samples], kind="stable")
    return SubgraphDataset([samples[i] for i in order], K, M)


def audit_labels(dataset, host, problem, full_score, b, seed=0, fraction=0.1, n_rr=None):
    """Recompute ratios on a subsample; returns the number of label mismatches."""
    rng = np.random.default_rng(seed)
    k = max(1, int(round(fraction * len(dataset.samples))))
    idx = rng.choice(len(dataset.samples), size=k, replace=False)
    bad = 0
    for i in idx:
        s = dataset.samples[i]
        sub = s.subgraph if s.subgraph is not None else induce_subgraph(host, s.X)
        score, _ = score_on_host(problem, host, sub, min(b, sub.n), seed=seed, n_rr=n_rr, eval_seed=seed)
        bad += int(label_map(solution_ratio(score, full_score), dataset.K) != s.label)
    return bad


# -- batching -------------------------------------------------------------------

@dataclass
class GraphTensors:
    x: np.ndarray
    edge_index: np.ndarray
    tie_key: np.ndarray


def graph_tensors(sub, features):
    """Encoder inputs for a subgraph: host feature rows, symmetric edges, host ids."""
    return GraphTensors(features.values[sub.parent_index], sub.edge_index(), sub.parent_index)


def collate(items):
    """Disjoint union of several subgraphs for one batched encoder pass."""
    xs, eis, batch, ties, off = [], [], [], [], 0
    for i, it in enumerate(items):
        n = len(it.x)
        xs.append(it.x)
        eis.append(it.edge_index + off)
        batch.append(np.full(n, i, dtype=np.int64))
        ties.append(it.tie_key)
        off += n
    return (as_tensor(np.concatenate(xs)), torch.as_tensor(np.concatenate(eis, axis=1)),
            torch.as_tensor(np.concatenate(batch)), np.concatenate(ties), len(items))


def encode(encoder, sub, features):
    """Embedding of one subgraph plus its layer-1 vertex embeddings (rows follow ``sub``)."""
    gt = graph_tensors(sub, features)
    with torch.no_grad():
        emb, h1 = encoder(as_tensor(gt.x), torch.as_tensor(gt.edge_index), tie_key=gt.tie_key)
    return emb[0].numpy(), h1.numpy()


def encode_many(encoder, items, chunk=256):
    out = []
    with torch.no_grad():
        for s in range(0, len(items), chunk):
            x, ei, batch, tie, ng = collate(items[s:s + chunk])
            out.append(encoder(x, ei, batch, tie, ng)[0].numpy())
    return np.concatenate(out)


class Embedder:
    """Frozen encoder bound to a host feature table; callable on subgraphs."""

    def __init__(self, encoder, features):
        self.encoder, self.features = encoder, features
        encoder.eval()

    def __call__(self, sub):
        return encode(self.encoder, sub, self.features)


# -- training -------------------------------------------------------------------

@dataclass
class EncoderConfig:
    hidden: int = 30
    out_dim: int = 10
    ratio: float = 0.8
    tau: float = 0.1
    lr: float = 1e-3
    batch: int = 128
    epochs: int = 100
    negatives: int = 6
    patience: int = 15
    min_delta: float = 1e-4


def sample_contrast(labels, rng, negatives):
    """Per query: one same-class positive (another sample when possible) and negatives from other classes."""
    n = len(labels)
    by_class = {c: np.flatnonzero(labels == c) for c in np.unique(labels)}
    pos = np.empty(n, dtype=np.int64)
    neg = np.empty((n, negatives), dtype=np.int64)
    for i in range(n):
        same = by_class[labels[i]]
        choice = same[same != i] if len(same) > 1 else same
        pos[i] = choice[rng.integers(len(choice))]
        other = np.flatnonzero(labels != labels[i])
        neg[i] = other[rng.integers(len(other), size=negatives)]
    return pos, neg


def train_encoder(dataset, features, config=None, seed=0, on_epoch=None):
    """InfoNCE training; returns ``(encoder, per-epoch mean losses)``."""
    config = config or EncoderConfig()
    labels = dataset.labels()
    counts = np.bincount(labels)
    if (counts[np.unique(labels)] < 2).any():
        raise ValueError("every class needs at least 2 samples for contrastive training")
    if len(np.unique(labels)) < 2:
        raise ValueError("contrastive training needs at least two classes")
    rng = np.random.default_rng(seed)
    with seeded(seed):
        enc = Encoder(features.width, config.hidden, config.out_dim, config.ratio)
    opt = torch.optim.Adam(enc.parameters(), lr=config.lr)
    items = [graph_tensors(s.subgraph, features) for s in dataset.samples]
    history, best, stale = [], math.inf, 0
    for epoch in range(config.epochs):
        perm = rng.permutation(len(items))
        pos, neg = sample_contrast(labels, rng, config.negatives)
        losses = []
        for start in range(0, len(perm), config.batch):
            q = perm[start:start + config.batch]
            need = np.unique(np.concatenate([q, pos[q], neg[q].ravel()]))
            where = {int(j): i for i, j in enumerate(need)}
            x, ei, batch, tie, ng = collate([items[j] for j in need])
            emb, _ = enc(x, ei, batch, tie, ng)
            qi = torch.as_tensor([where[int(j)] for j in q])
            pi = torch.as_tensor([where[int(j)] for j in pos[q]])
            ni = torch.as_tensor([[where[int(j)] for j in row] for row in neg[q]])
            loss = info_nce(emb[qi], emb[pi], emb[ni], config.tau)
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(loss.item() * len(q))
        mean = sum(losses) / len(perm)
        history.append(mean)
        if on_epoch:
            on_epoch(epoch, mean)
        log.debug("encoder epoch %d loss %.5f", epoch, mean)
        if mean < best - config.min_delta:
            best, stale = mean, 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    enc.eval()
    return enc, history


def dataset_embeddings(encoder, dataset, features):
    return encode_many(encoder, [graph_tensors(s.subgraph, features) for s in dataset.samples])


def compute_goal(encoder, dataset, features, beta=1.0):
    """Centroid of the class-1 embeddings."""
    emb = dataset_embeddings(encoder, dataset, features)
    ones = dataset.labels() == 1
    if not ones.any():
        raise ValueError("dataset has no class-1 subgraphs")
    return GoalPoint(emb[ones].mean(axis=0), beta)
