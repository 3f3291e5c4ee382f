"""Differentiable building blocks (float64 torch): GraphSAGE, top-k pooling,
readout, the subgraph encoder, the vertex classifier, the Q-network, losses,
a functional Adam step, finite-difference gradient checks and checkpoints.
"""
from __future__ import annotations

import contextlib
import json
import math

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

DTYPE = torch.float64
CHECKPOINT_FORMAT = "subnav-checkpoint"
CHECKPOINT_VERSION = 1


@contextlib.contextmanager
def seeded(seed):
    """Run a block (e.g. module construction) under a private torch RNG state."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(int(seed))
        yield


def as_tensor(a, dtype=DTYPE):
    if isinstance(a, torch.Tensor):
        return a.to(dtype)
    a = np.asarray(a)
    if not a.flags.writeable:  # read-only feature tables; torch wants owned memory
        a = a.copy()
    return torch.as_tensor(a, dtype=dtype)


class SageLayer(nn.Module):
    """Mean-aggregator GraphSAGE layer with ReLU."""

    def __init__(self, in_dim, out_dim):
        super().__init__()
        self.lin_self = nn.Linear(in_dim, out_dim, bias=True, dtype=DTYPE)
        self.lin_neigh = nn.Linear(in_dim, out_dim, bias=False, dtype=DTYPE)

    def forward(self, h, edge_index):
        return F.relu(self.lin_self(h) + self.lin_neigh(mean_neighbours(h, edge_index)))


def mean_neighbours(h, edge_index):
    """Mean of neighbour rows; rows without neighbours get zeros."""
    tgt, src = edge_index[0], edge_index[1]
    agg = torch.zeros_like(h).index_add_(0, tgt, h[src])
    deg = torch.bincount(tgt, minlength=h.shape[0]).clamp(min=1).to(h.dtype)
    return agg / deg.unsqueeze(1)


def keep_count(ratio, n):
    return max(1, math.ceil(ratio * n - 1e-9))


class TopKPool(nn.Module):
    """Keeps the ceil(k*n) best-scoring vertices per graph, gating rows by tanh(score).

    Score ties go to the smaller ``tie_key`` (host vertex id).
    """

    def __init__(self, width, ratio=0.8):
        super().__init__()
        if not 0 < ratio <= 1:
            raise ValueError("pooling ratio must lie in (0, 1]")
        bound = 1.0 / math.sqrt(width)
        self.p = nn.Parameter(torch.empty(width, dtype=DTYPE).uniform_(-bound, bound))
        self.ratio = ratio

    def forward(self, h, edge_index, batch, tie_key, num_graphs):
        norm = self.p.norm()
        if float(norm.detach()) <= 1e-12:
            with torch.no_grad():
                self.p.copy_(torch.full_like(self.p, 1.0 / math.sqrt(self.p.numel())))
            norm = self.p.norm()
        score = h @ self.p / norm
        keep = topk_indices(score.detach().cpu().numpy(), batch.numpy(), tie_key, num_graphs, self.ratio)
        keep_t = torch.as_tensor(keep)
        h_new = h[keep_t] * torch.tanh(score[keep_t]).unsqueeze(1)
        return (h_new, filter_edges(edge_index, keep, h.shape[0]), batch[keep_t], tie_key[keep], keep)


def topk_indices(score, batch, tie_key, num_graphs, ratio):
    n_per = np.bincount(batch, minlength=num_graphs)
    k_per = np.array([keep_count(ratio, n) if n else 0 for n in n_per])
    order = np.lexsort((tie_key, -score, batch))
    starts = np.cumsum(n_per) - n_per
    rank = np.arange(len(order)) - starts[batch[order]]
    return np.sort(order[rank < k_per[batch[order]]])


def filter_edges(edge_index, keep, n):
    remap = np.full(n, -1, dtype=np.int64)
    remap[keep] = np.arange(len(keep))
    ei = edge_index.numpy()
    mask = (remap[ei[0]] >= 0) & (remap[ei[1]] >= 0)
    return torch.as_tensor(remap[ei[:, mask]])


def readout(h, batch=None, num_graphs=1):
    """Per-graph concatenation of column-wise mean and max."""
    if h.shape[0] == 0:
        raise ValueError("readout of an empty vertex set")
    if batch is None:
        return torch.cat([h.mean(0), h.max(0).values]).unsqueeze(0)
    counts = torch.bincount(batch, minlength=num_graphs).to(h.dtype).unsqueeze(1)
    mean = torch.zeros(num_graphs, h.shape[1], dtype=h.dtype).index_add_(0, batch, h) / counts
    idx = batch.unsqueeze(1).expand_as(h)
    mx = torch.zeros(num_graphs, h.shape[1], dtype=h.dtype).scatter_reduce(0, idx, h, "amax", include_self=False)
    return torch.cat([mean, mx], dim=1)


class Encoder(nn.Module):
    """Three (GraphSAGE -> top-k pool) blocks, summed mean||max readouts, linear head.

    ``forward`` returns the graph embeddings and the layer-1 (pre-pooling)
    vertex embeddings.
    """

    def __init__(self, in_dim, hidden, out_dim, ratio=0.8, layers=3):
        super().__init__()
        dims = [in_dim] + [hidden] * layers
        self.convs = nn.ModuleList(SageLayer(a, b) for a, b in zip(dims[:-1], dims[1:]))
        self.pools = nn.ModuleList(TopKPool(hidden, ratio) for _ in range(layers))
        self.head = nn.Linear(2 * hidden, out_dim, dtype=DTYPE)
        self.in_dim, self.hidden, self.out_dim, self.ratio = in_dim, hidden, out_dim, ratio

    def forward(self, x, edge_index, batch=None, tie_key=None, num_graphs=1):
        n = x.shape[0]
        if n == 0:
            raise ValueError("cannot encode an empty subgraph")
        if batch is None:
            batch = torch.zeros(n, dtype=torch.long)
        if tie_key is None:
            tie_key = np.arange(n)
        h, total, first = x, None, None
        for conv, pool in zip(self.convs, self.pools):
            h = conv(h, edge_index)
            if first is None:
                first = h
            h, edge_index, batch, tie_key, _ = pool(h, edge_index, batch, tie_key, num_graphs)
            r = readout(h, batch, num_graphs)
            total = r if total is None else total + r
        return self.head(total), first

    def config(self):
        return {"in_dim": self.in_dim, "hidden": self.hidden, "out_dim": self.out_dim, "ratio": self.ratio}


class VertexClassifier(nn.Module):
    """Encoder layout without pooling; per-vertex solution-membership logit."""

    def __init__(self, in_dim, hidden, layers=3):
        super().__init__()
        dims = [in_dim] + [hidden] * layers
        self.convs = nn.ModuleList(SageLayer(a, b) for a, b in zip(dims[:-1], dims[1:]))
        self.out = nn.Linear(hidden, 1, dtype=DTYPE)
        self.in_dim, self.hidden = in_dim, hidden

    def forward(self, x, edge_index):
        h = x
        for conv in self.convs:
            h = conv(h, edge_index)
        return self.out(h).squeeze(1)

    def config(self):
        return {"in_dim": self.in_dim, "hidden": self.hidden}


class QNet(nn.Module):
    """Q(state, out-vertex, in-vertex): three 128-unit input heads, 384->128->128->1 trunk."""

    def __init__(self, state_dim, vertex_dim, width=128):
        super().__init__()
        self.state_head = nn.Linear(state_dim, width, dtype=DTYPE)
        self.out_head = nn.Linear(vertex_dim, width, dtype=DTYPE)
        self.in_head = nn.Linear(vertex_dim, width, dtype=DTYPE)
        self.trunk = nn.Sequential(
            nn.Linear(3 * width, width, dtype=DTYPE), nn.ReLU(),
            nn.Linear(width, width, dtype=DTYPE), nn.ReLU(),
            nn.Linear(width, 1, dtype=DTYPE),
        )
        self.state_dim, self.vertex_dim, self.width = state_dim, vertex_dim, width

    def forward(self, state, v, u):
        z = torch.cat([F.relu(self.state_head(state)), F.relu(self.out_head(v)), F.relu(self.in_head(u))], dim=-1)
        return self.trunk(z).squeeze(-1)

    def config(self):
        return {"state_dim": self.state_dim, "vertex_dim": self.vertex_dim, "width": self.width}


# -- losses ---------------------------------------------------------------------

def info_nce(x, x_plus, negatives, tau=0.1):
    """Contrastive loss of query ``x`` against one positive and a set of negatives.

    Accepts a single query (``x: (d,)``, ``negatives: (k, d)``) or a batch
    (``x: (B, d)``, ``negatives: (B, k, d)``); batches return the mean.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    x, x_plus, negatives = (as_tensor(t) if not isinstance(t, torch.Tensor) else t for t in (x, x_plus, negatives))
    single = x.dim() == 1
    if single:
        x, x_plus, negatives = x.unsqueeze(0), x_plus.unsqueeze(0), negatives.unsqueeze(0)
    pos = (x * x_plus).sum(-1, keepdim=True) / tau
    neg = torch.einsum("bd,bkd->bk", x, negatives) / tau
    logits = torch.cat([pos, neg], dim=1)
    loss = torch.logsumexp(logits, dim=1) - logits[:, 0]
    return loss[0] if single else loss.mean()


def cross_entropy(logits, label):
    """Softmax cross entropy; ``label`` is 1-based like the subgraph classes."""
    logits = as_tensor(logits) if not isinstance(logits, torch.Tensor) else logits
    label = torch.as_tensor(label).long() - 1
    if logits.dim() == 1:
        return F.cross_entropy(logits.unsqueeze(0), label.reshape(1))
    return F.cross_entropy(logits, label)


def ordinal_target(label, K):
    """Class ``i`` (1-based) maps to ones in the first ``i`` slots, zeros after."""
    if not 1 <= label <= K:
        raise ValueError(f"label {label} outside 1..{K}")
    return torch.tensor([1.0 if j <= label else 0.0 for j in range(1, K + 1)], dtype=DTYPE)


def ordinal_loss(pred, label):
    """Mean squared error between sigmoid outputs and the ordinal target."""
    pred = as_tensor(pred) if not isinstance(pred, torch.Tensor) else pred
    if pred.dim() == 1:
        return F.mse_loss(pred, ordinal_target(int(label), pred.shape[0]))
    target = torch.stack([ordinal_target(int(l), pred.shape[1]) for l in label])
    return F.mse_loss(pred, target)


# -- optimisation ---------------------------------------------------------------

def adam_step(params, grads, state=None, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
    """One bias-corrected Adam update on numpy arrays; returns ``(params, state)``."""
    if state is None:
        state = {"t": 0, "m": [np.zeros_like(p) for p in params], "v": [np.zeros_like(p) for p in params]}
    b1, b2 = betas
    t = state["t"] + 1
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state["m"], state["v"]):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        new_p.append(p - lr * m_hat / (np.sqrt(v_hat) + eps))
        new_m.append(m)
        new_v.append(v)
    return new_p, {"t": t, "m": new_m, "v": new_v}


def grad_check(f, params, eps=1e-5, max_coords=None, seed=0, floor=1e-6):
    """Largest relative error between autograd and central differences.

    ``f()`` must return a scalar tensor built from ``params``. The relative
    error uses ``max(|analytic|, |numeric|, floor)`` as denominator. When
    ``max_coords`` is set, that many coordinates per tensor are sampled.
    """
    params = list(params)
    analytic = torch.autograd.grad(f(), params, allow_unused=True)
    rng = np.random.default_rng(seed)
    worst = 0.0
    with torch.no_grad():
        for p, a in zip(params, analytic):
            a = torch.zeros_like(p) if a is None else a
            flat, aflat = p.view(-1), a.reshape(-1)
            coords = np.arange(flat.numel())
            if max_coords is not None and len(coords) > max_coords:
                coords = np.sort(rng.choice(coords, max_coords, replace=False))
            for i in coords:
                orig = flat[i].item()
                flat[i] = orig + eps
                up = f().item()
                flat[i] = orig - eps
                down = f().item()
                flat[i] = orig
                num = (up - down) / (2 * eps)
                an = aflat[i].item()
                worst = max(worst, abs(an - num) / max(abs(an), abs(num), floor))
    return worst


def polyak_update(target, online, rho):
    """``target <- (1 - rho) * target + rho * online``, in place."""
    with torch.no_grad():
        for t, o in zip(target.parameters(), online.parameters()):
            t.mul_(1.0 - rho).add_(o, alpha=rho)
    return target


# -- checkpoints ----------------------------------------------------------------

def save_checkpoint(path, module, kind, meta=None):
    """JSON tensor dump: ``{name, shape, data}`` rows, row-major, exact float repr."""
    tensors = [{"name": k, "shape": list(v.shape), "data": v.detach().reshape(-1).tolist()}
               for k, v in module.state_dict().items()]
    doc = {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION, "kind": kind,
           "config": module.config(), "meta": meta or {}, "tensors": tensors}
    with open(path, "w") as fh:
        json.dump(doc, fh)


_KINDS = {"encoder": Encoder, "qnet": QNet, "classifier": VertexClassifier}


def load_checkpoint(path):
    """Rebuild a module from :func:`save_checkpoint` output; returns ``(module, meta)``."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT or doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: not a version-{CHECKPOINT_VERSION} {CHECKPOINT_FORMAT} file")
    module = _KINDS[doc["kind"]](**doc["config"])
    state = {t["name"]: torch.tensor(t["data"], dtype=DTYPE).reshape(t["shape"]) for t in doc["tensors"]}
    module.load_state_dict(state)
    return module, doc["meta"]
