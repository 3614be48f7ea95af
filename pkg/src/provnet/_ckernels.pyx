# distutils: language = c++
# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels mirroring provnet._pykernels (same results, bit for bit)."""

import numpy as np

from libc.stdint cimport int64_t
from libcpp.vector cimport vector
from libcpp.unordered_map cimport unordered_map
from cython.operator cimport dereference as deref, preincrement as inc


def pair_keys(const int64_t[::1] indptr, const int64_t[::1] indices, int64_t n_nodes,
              Py_ssize_t start, Py_ssize_t stop):
    cdef Py_ssize_t p, a, b, lo, hi, total = 0, pos = 0
    cdef int64_t base
    for p in range(start, stop):
        hi = indptr[p + 1] - indptr[p]
        total += hi * (hi - 1) // 2
    out = np.empty(total, dtype=np.int64)
    cdef int64_t[::1] o = out
    with nogil:
        for p in range(start, stop):
            lo = indptr[p]
            hi = indptr[p + 1]
            for a in range(lo, hi):
                base = indices[a] * n_nodes
                for b in range(a + 1, hi):
                    o[pos] = base + indices[b]
                    pos += 1
    return out


cdef struct Entry:
    double g
    int64_t i
    int64_t j


cdef inline bint _before(const Entry& x, const Entry& y) noexcept nogil:
    if x.g != y.g:
        return x.g > y.g
    if x.i != y.i:
        return x.i < y.i
    return x.j < y.j


cdef void _push(vector[Entry]& h, Entry e) noexcept nogil:
    h.push_back(e)
    cdef size_t c = h.size() - 1, parent
    while c > 0:
        parent = (c - 1) >> 1
        if _before(h[c], h[parent]):
            h[c], h[parent] = h[parent], h[c]
            c = parent
        else:
            break


cdef Entry _pop(vector[Entry]& h) noexcept nogil:
    cdef Entry top = h[0]
    h[0] = h.back()
    h.pop_back()
    cdef size_t n = h.size(), c = 0, l, r, best
    while True:
        l = 2 * c + 1
        r = l + 1
        best = c
        if l < n and _before(h[l], h[best]):
            best = l
        if r < n and _before(h[r], h[best]):
            best = r
        if best == c:
            break
        h[c], h[best] = h[best], h[c]
        c = best
    return top


def greedy_merges(int64_t n, const int64_t[::1] src, const int64_t[::1] dst, const double[::1] weight):
    cdef vector[double] k = vector[double](n, 0.0)
    cdef vector[unordered_map[int64_t, double]] nbrs = vector[unordered_map[int64_t, double]](n)
    cdef vector[char] alive = vector[char](n, 1)
    cdef vector[Entry] heap
    cdef vector[int64_t] out_a, out_b
    cdef vector[double] out_g
    cdef double total = 0.0, two_m, w, wl, gain, ki
    cdef Py_ssize_t e, m = src.shape[0]
    cdef int64_t u, v, i, j, l
    cdef Entry ent
    cdef unordered_map[int64_t, double].iterator it, found

    with nogil:
        for e in range(m):
            u = src[e]
            v = dst[e]
            w = weight[e]
            if w <= 0 or u == v:
                continue
            nbrs[u][v] = nbrs[u][v] + w
            nbrs[v][u] = nbrs[v][u] + w
            k[u] += w
            k[v] += w
            total += w
        two_m = 2.0 * total

        for i in range(n):
            it = nbrs[i].begin()
            while it != nbrs[i].end():
                j = deref(it).first
                if i < j:
                    ent.g = deref(it).second * two_m - k[i] * k[j]
                    ent.i = i
                    ent.j = j
                    _push(heap, ent)
                inc(it)

        while heap.size() > 0:
            ent = _pop(heap)
            i = ent.i
            j = ent.j
            if not (alive[i] and alive[j]):
                continue
            found = nbrs[i].find(j)
            if found == nbrs[i].end():
                continue
            w = deref(found).second
            gain = w * two_m - k[i] * k[j]
            if gain != ent.g:
                continue
            out_a.push_back(i)
            out_b.push_back(j)
            out_g.push_back(gain)

            nbrs[i].erase(j)
            it = nbrs[j].begin()
            while it != nbrs[j].end():
                l = deref(it).first
                wl = deref(it).second
                inc(it)
                if l == i:
                    continue
                nbrs[l].erase(j)
                found = nbrs[i].find(l)
                if found != nbrs[i].end():
                    deref(found).second = deref(found).second + wl
                    nbrs[l][i] = nbrs[l][i] + wl
                else:
                    nbrs[i][l] = wl
                    nbrs[l][i] = wl
            nbrs[j].clear()
            alive[j] = 0
            k[i] = k[i] + k[j]
            k[j] = 0.0
            ki = k[i]
            it = nbrs[i].begin()
            while it != nbrs[i].end():
                l = deref(it).first
                ent.g = deref(it).second * two_m - ki * k[l]
                if i < l:
                    ent.i = i
                    ent.j = l
                else:
                    ent.i = l
                    ent.j = i
                _push(heap, ent)
                inc(it)

    a = np.empty(out_a.size(), dtype=np.int64)
    b = np.empty(out_b.size(), dtype=np.int64)
    g = np.empty(out_g.size(), dtype=np.float64)
    cdef int64_t[::1] av = a, bv = b
    cdef double[::1] gv = g
    cdef size_t t
    for t in range(out_a.size()):
        av[t] = out_a[t]
        bv[t] = out_b[t]
        gv[t] = out_g[t]
    return a, b, g
