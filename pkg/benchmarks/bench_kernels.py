"""Time the compiled kernels against their pure-Python twins.

    python3 benchmarks/bench_kernels.py [--n 2000] [--m 4] [--repeat 3]

Every kernel is run on both backends with identical inputs; the outputs are
compared for exact equality before timings are reported.
"""
import argparse
import time

import numpy as np

from subnav.graph import from_edges
from subnav.kernels import backends
from subnav.problems import _forward_csr, _reverse_csr, with_cascade_weights


def preferential_graph(n, m, seed):
    """Barabasi-Albert style edges: each new vertex attaches to m degree-weighted targets."""
    rng = np.random.default_rng(seed)
    pool = list(range(m))
    edges = []
    for v in range(m, n):
        targets = set()
        while len(targets) < m:
            targets.add(pool[rng.integers(len(pool))])
        for u in sorted(targets):
            edges.append((u, v))
            pool += [u, v]
    return from_edges(edges)


def timed(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def cases(g, n_sim, n_rr):
    im = with_cascade_weights(g)
    fwd, rev = _forward_csr(im), _reverse_csr(im)
    seeds = np.argsort(-g.degree(), kind="stable")[:20].astype(np.int64)
    elem_indptr = np.arange(0, 2 * g.n_edges + 1, 2, dtype=np.int64)
    elem_sets = np.empty(2 * g.n_edges, dtype=np.int64)
    elem_sets[0::2], elem_sets[1::2] = g.src, g.dst
    return {
        f"ic_spreads  ({n_sim} cascades)": lambda k: k.ic_spreads(*fwd, seeds, 0, n_sim, 7),
        f"rr_sets     ({n_rr} sets)": lambda k: k.rr_sets(*rev, 0, n_rr, 7),
        "greedy_cover (MVC, b=100)": lambda k: k.greedy_max_coverage(g.inc_indptr, g.inc_eids, elem_indptr,
                                                                     elem_sets, 100),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--n-sim", type=int, default=200)
    p.add_argument("--n-rr", type=int, default=20000)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    g = preferential_graph(args.n, args.m, seed=0)
    impls = backends()
    print(f"graph: n={g.n} m={g.n_edges}; backends: {', '.join(impls)}")
    if "cython" not in impls:
        print("compiled extension not built; only the Python backend is timed")
    print(f"{'kernel':34s}" + "".join(f"{name:>12s}" for name in impls) + f"{'speed-up':>10s}")
    for label, run in cases(g, args.n_sim, args.n_rr).items():
        times, outs = {}, {}
        for name, mod in impls.items():
            times[name], outs[name] = timed(lambda: run(mod), args.repeat)
        row = f"{label:34s}" + "".join(f"{times[n]:11.4f}s" for n in impls)
        if "cython" in impls:
            if not same(outs["python"], outs["cython"]):
                raise SystemExit(f"{label}: backends disagree")
            row += f"{times['python'] / times['cython']:9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
