# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: IC cascades, reverse-reachable sets, greedy max coverage.

Must stay bit-identical to ``_pykernels``; both draw coins from the same
splitmix64 counter hash.
"""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef uint64_t ROOT_SLOT = 0xFFFFFFFFFFFFFFFFULL
cdef double INV53 = 1.0 / 9007199254740992.0


cdef inline uint64_t mix64(uint64_t x) nogil:
    x = x + 0x9E3779B97F4A7C15ULL
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL
    return x ^ (x >> 31)


cdef inline uint64_t stream_key(uint64_t seed, uint64_t stream) nogil:
    return mix64(seed ^ mix64(stream))


cdef inline double uniform(uint64_t key, uint64_t index) nogil:
    return <double>(mix64(key + mix64(index)) >> 11) * INV53


def ic_spreads(const int64_t[::1] indptr, const int64_t[::1] indices,
               const int64_t[::1] arc_ids, const double[::1] probs,
               seeds, Py_ssize_t sim_start, Py_ssize_t sim_stop, seed):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef int64_t[::1] seed_arr = np.ascontiguousarray(seeds, dtype=np.int64)
    cdef Py_ssize_t n_seeds = seed_arr.shape[0]
    cdef uint64_t useed = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    out_arr = np.zeros(sim_stop - sim_start, dtype=np.int64)
    cdef int64_t[::1] out = out_arr
    cdef cnp.uint8_t[::1] active = np.zeros(n, dtype=np.uint8)
    cdef int64_t[::1] queue = np.empty(max(n, 1), dtype=np.int64)
    cdef Py_ssize_t sim, i, head, tail, k, u, v
    cdef uint64_t key
    with nogil:
        for sim in range(sim_start, sim_stop):
            key = stream_key(useed, <uint64_t>sim)
            tail = 0
            for i in range(n_seeds):
                u = seed_arr[i]
                if not active[u]:
                    active[u] = 1
                    queue[tail] = u
                    tail += 1
            head = 0
            while head < tail:
                u = queue[head]
                head += 1
                for k in range(indptr[u], indptr[u + 1]):
                    v = indices[k]
                    if not active[v] and uniform(key, <uint64_t>arc_ids[k]) < probs[k]:
                        active[v] = 1
                        queue[tail] = v
                        tail += 1
            out[sim - sim_start] = tail
            for i in range(tail):
                active[queue[i]] = 0
    return out_arr


def rr_sets(const int64_t[::1] in_indptr, const int64_t[::1] in_indices,
            const int64_t[::1] arc_ids, const double[::1] probs,
            Py_ssize_t rr_start, Py_ssize_t rr_stop, seed):
    cdef Py_ssize_t n = in_indptr.shape[0] - 1
    cdef uint64_t useed = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef Py_ssize_t n_rr = rr_stop - rr_start
    ptr_arr = np.zeros(n_rr + 1, dtype=np.int64)
    cdef int64_t[::1] ptr = ptr_arr
    cdef cnp.uint8_t[::1] visited = np.zeros(n, dtype=np.uint8)
    cdef int64_t[::1] queue = np.empty(max(n, 1), dtype=np.int64)
    cdef Py_ssize_t cap = max(4 * n_rr, 16)
    members_arr = np.empty(cap, dtype=np.int64)
    cdef int64_t[::1] members = members_arr
    cdef Py_ssize_t i, head, tail, k, w, x, root, used = 0
    cdef uint64_t key
    for i in range(rr_start, rr_stop):
        with nogil:
            key = stream_key(useed, <uint64_t>i)
            root = <Py_ssize_t>(uniform(key, ROOT_SLOT) * n)
            if root >= n:
                root = n - 1
            queue[0] = root
            visited[root] = 1
            tail = 1
            head = 0
            while head < tail:
                w = queue[head]
                head += 1
                for k in range(in_indptr[w], in_indptr[w + 1]):
                    x = in_indices[k]
                    if not visited[x] and uniform(key, <uint64_t>arc_ids[k]) < probs[k]:
                        visited[x] = 1
                        queue[tail] = x
                        tail += 1
            for k in range(tail):
                visited[queue[k]] = 0
        if used + tail > cap:
            cap = max(2 * cap, used + tail)
            grown = np.empty(cap, dtype=np.int64)
            grown[:used] = members_arr[:used]
            members_arr = grown
            members = members_arr
        for k in range(tail):
            members[used + k] = queue[k]
        used += tail
        ptr[i - rr_start + 1] = used
    return ptr_arr, members_arr[:used].copy()


def greedy_max_coverage(const int64_t[::1] set_indptr, const int64_t[::1] set_elems,
                        const int64_t[::1] elem_indptr, const int64_t[::1] elem_sets,
                        Py_ssize_t budget):
    """Pick ``budget`` sets, each maximizing newly covered elements (ties: lowest id)."""
    cdef Py_ssize_t n_sets = set_indptr.shape[0] - 1
    cdef Py_ssize_t n_elems = elem_indptr.shape[0] - 1
    cdef int64_t[::1] gain = np.empty(n_sets, dtype=np.int64)
    cdef cnp.uint8_t[::1] covered = np.zeros(n_elems, dtype=np.uint8)
    chosen_arr = np.empty(budget, dtype=np.int64)
    cdef int64_t[::1] chosen = chosen_arr
    cdef Py_ssize_t it, v, best, k, e, j, w
    cdef int64_t best_gain, total = 0
    with nogil:
        for v in range(n_sets):
            gain[v] = set_indptr[v + 1] - set_indptr[v]
        for it in range(budget):
            best = -1
            best_gain = -1
            for v in range(n_sets):
                if gain[v] > best_gain:
                    best = v
                    best_gain = gain[v]
            chosen[it] = best
            gain[best] = -1
            for k in range(set_indptr[best], set_indptr[best + 1]):
                e = set_elems[k]
                if covered[e]:
                    continue
                covered[e] = 1
                total += 1
                for j in range(elem_indptr[e], elem_indptr[e + 1]):
                    w = elem_sets[j]
                    if gain[w] > 0:
                        gain[w] -= 1
    return chosen_arr, total
