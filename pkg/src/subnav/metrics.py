"""Shared evaluation row and CSV schema."""
from __future__ import annotations

import csv
import time
from dataclasses import asdict, dataclass, fields

import numpy as np

from .heuristics import lift, solution_ratio, solve
from .problems import objective

FIELDS = ("graph", "problem", "method", "budget", "ratio", "stderr", "P_V", "P_E", "runtime_s", "seed")


@dataclass
class MetricsRow:
    graph: str
    problem: str
    method: str
    budget: int
    ratio: float
    stderr: float
    P_V: float
    P_E: float
    runtime_s: float
    seed: int


def pruned_fractions(full, pruned):
    return 1.0 - pruned.n / full.n, 1.0 - pruned.n_edges / full.n_edges


def pruned_ratio(problem, full, pruned, b, full_score=None, seed=0, n_rr=None):
    """Solver on ``pruned`` scored on ``full``, over the solver's own full-graph score."""
    if full_score is None:
        full_sol = solve(problem, full, b, seed=seed, n_rr=n_rr)
        full_score = objective(problem, full, full_sol.vertices, seed=seed)
    sub_sol = solve(problem, pruned, min(b, pruned.n), seed=seed, n_rr=n_rr)
    score = objective(problem, full, lift(pruned, sub_sol.vertices), seed=seed)
    return solution_ratio(score, full_score)


def evaluate_pruned(problem, full, pruned, b, graph="", method="", seed=0, full_score=None, n_rr=None):
    t0 = time.perf_counter()
    ratio = pruned_ratio(problem, full, pruned, b, full_score, seed, n_rr)
    pv, pe = pruned_fractions(full, pruned)
    return MetricsRow(graph, str(getattr(problem, "name", problem)), method, b, ratio, 0.0, pv, pe,
                      time.perf_counter() - t0, seed)


def aggregate(rows, method=None):
    """Mean row with the standard error of the ratio."""
    r = np.array([x.ratio for x in rows])
    se = float(r.std(ddof=1) / np.sqrt(len(r))) if len(r) > 1 else 0.0
    first = rows[0]
    return MetricsRow(first.graph, first.problem, method or first.method, first.budget, float(r.mean()), se,
                      float(np.mean([x.P_V for x in rows])), float(np.mean([x.P_E for x in rows])),
                      float(np.sum([x.runtime_s for x in rows])), first.seed)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_metrics(path, rows, append=False):
    with open(path, "a" if append else "w", newline="") as fh:
        w = csv.writer(fh)
        if not append or fh.tell() == 0:
            w.writerow(FIELDS)
        for row in rows:
            d = asdict(row)
            w.writerow([_fmt(d[f]) for f in FIELDS])


def read_metrics(path):
    with open(path, newline="") as fh:
        out = []
        types = {f.name: f.type for f in fields(MetricsRow)}
        for rec in csv.DictReader(fh):
            out.append(MetricsRow(**{k: (int(v) if types[k] == "int" else float(v) if types[k] == "float" else v)
                                     for k, v in rec.items()}))
        return out
