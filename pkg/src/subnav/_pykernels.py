"""Pure-Python reference versions of the compiled kernels in ``_kernels.pyx``.

Every function here returns bit-identical results to its compiled twin; the
random stream is the counter-based hash in :func:`uniform`, so a coin for
(seed, stream, index) does not depend on traversal order.
"""
import numpy as np

MASK = 0xFFFFFFFFFFFFFFFF
ROOT_SLOT = 0xFFFFFFFFFFFFFFFF
_INV53 = 1.0 / 9007199254740992.0


def mix64(x):
    """splitmix64 finalizer on a Python int."""
    x = (x + 0x9E3779B97F4A7C15) & MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK
    return x ^ (x >> 31)


def stream_key(seed, stream):
    return mix64((seed & MASK) ^ mix64(stream & MASK))


def uniform(key, index):
    """Uniform double in [0, 1) for slot ``index`` of the stream ``key``."""
    return (mix64((key + mix64(index & MASK)) & MASK) >> 11) * _INV53


def ic_spreads(indptr, indices, arc_ids, probs, seeds, sim_start, sim_stop, seed):
    n = len(indptr) - 1
    out = np.zeros(sim_stop - sim_start, dtype=np.int64)
    indptr = indptr.tolist()
    indices = indices.tolist()
    arc_ids = arc_ids.tolist()
    probs = probs.tolist()
    seeds = [int(s) for s in seeds]
    for j, sim in enumerate(range(sim_start, sim_stop)):
        key = stream_key(seed, sim)
        active = [False] * n
        queue = []
        for s in seeds:
            if not active[s]:
                active[s] = True
                queue.append(s)
        head = 0
        while head < len(queue):
            u = queue[head]
            head += 1
            for k in range(indptr[u], indptr[u + 1]):
                v = indices[k]
                if not active[v] and uniform(key, arc_ids[k]) < probs[k]:
                    active[v] = True
                    queue.append(v)
        out[j] = len(queue)
    return out


def rr_sets(in_indptr, in_indices, arc_ids, probs, rr_start, rr_stop, seed):
    n = len(in_indptr) - 1
    in_indptr = in_indptr.tolist()
    in_indices = in_indices.tolist()
    arc_ids = arc_ids.tolist()
    probs = probs.tolist()
    ptr = [0]
    members = []
    visited = [False] * n
    for i in range(rr_start, rr_stop):
        key = stream_key(seed, i)
        root = int(uniform(key, ROOT_SLOT) * n)
        if root >= n:
            root = n - 1
        queue = [root]
        visited[root] = True
        head = 0
        while head < len(queue):
            w = queue[head]
            head += 1
            for k in range(in_indptr[w], in_indptr[w + 1]):
                x = in_indices[k]
                if not visited[x] and uniform(key, arc_ids[k]) < probs[k]:
                    visited[x] = True
                    queue.append(x)
        for w in queue:
            visited[w] = False
        members.extend(queue)
        ptr.append(len(members))
    return np.asarray(ptr, dtype=np.int64), np.asarray(members, dtype=np.int64)


def greedy_max_coverage(set_indptr, set_elems, elem_indptr, elem_sets, budget):
    """Pick ``budget`` sets, each maximizing newly covered elements (ties: lowest id)."""
    n_sets = len(set_indptr) - 1
    n_elems = len(elem_indptr) - 1
    set_indptr = set_indptr.tolist()
    set_elems = set_elems.tolist()
    elem_indptr = elem_indptr.tolist()
    elem_sets = elem_sets.tolist()
    gain = [set_indptr[v + 1] - set_indptr[v] for v in range(n_sets)]
    covered = [False] * n_elems
    chosen = []
    total = 0
    for _ in range(budget):
        best, best_gain = -1, -1
        for v in range(n_sets):
            if gain[v] > best_gain:
                best, best_gain = v, gain[v]
        chosen.append(best)
        gain[best] = -1
        for k in range(set_indptr[best], set_indptr[best + 1]):
            e = set_elems[k]
            if covered[e]:
                continue
            covered[e] = True
            total += 1
            for j in range(elem_indptr[e], elem_indptr[e + 1]):
                w = elem_sets[j]
                if gain[w] > 0:
                    gain[w] -= 1
    return np.asarray(chosen, dtype=np.int64), total
