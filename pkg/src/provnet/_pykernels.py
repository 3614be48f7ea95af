"""Pure-Python reference kernels. Must stay bit-for-bit compatible with _ckernels."""

import heapq

import numpy as np


def pair_keys(indptr, indices, n_nodes, start, stop):
    """Encode every provider pair within each patient's provider set as ``u * n + v``.

    ``indices[indptr[p]:indptr[p + 1]]`` must be strictly increasing for each patient.
    """
    out = []
    for p in range(start, stop):
        row = indices[indptr[p]:indptr[p + 1]].tolist()
        k = len(row)
        for a in range(k):
            base = row[a] * n_nodes
            for b in range(a + 1, k):
                out.append(base + row[b])
    return np.asarray(out, dtype=np.int64)


def greedy_merges(n, src, dst, weight):
    """Agglomerative modularity merges over an undirected weighted graph.

    Returns parallel arrays (a, b, gain) where ``a < b`` are the ids of the
    merged communities (the result keeps id ``a``) and ``gain`` is the scaled
    modularity change ``w_ab * 2m - k_a * k_b``. The pair with the largest gain
    is merged first, ties to the smallest ``(a, b)``. Merging continues until no
    two adjacent communities remain.
    """
    k = [0.0] * n
    nbrs = [dict() for _ in range(n)]
    total = 0.0
    for u, v, w in zip(src.tolist(), dst.tolist(), weight.tolist()):
        if w <= 0 or u == v:
            continue
        nbrs[u][v] = nbrs[u].get(v, 0.0) + w
        nbrs[v][u] = nbrs[v].get(u, 0.0) + w
        k[u] += w
        k[v] += w
        total += w
    two_m = 2.0 * total

    heap = []
    for i in range(n):
        for j, w in nbrs[i].items():
            if i < j:
                heap.append((-(w * two_m - k[i] * k[j]), i, j))
    heapq.heapify(heap)

    alive = [True] * n
    out_a, out_b, out_g = [], [], []
    while heap:
        neg, i, j = heapq.heappop(heap)
        if not (alive[i] and alive[j]):
            continue
        w = nbrs[i].get(j)
        if w is None:
            continue
        gain = w * two_m - k[i] * k[j]
        if gain != -neg:
            continue
        out_a.append(i)
        out_b.append(j)
        out_g.append(gain)

        ni, nj = nbrs[i], nbrs[j]
        del ni[j]
        for l, wl in nj.items():
            if l == i:
                continue
            nl = nbrs[l]
            del nl[j]
            if l in ni:
                ni[l] = ni[l] + wl
                nl[i] = nl[i] + wl
            else:
                ni[l] = wl
                nl[i] = wl
        nj.clear()
        alive[j] = False
        k[i] = k[i] + k[j]
        k[j] = 0.0
        ki = k[i]
        for l, wl in ni.items():
            g = wl * two_m - ki * k[l]
            if i < l:
                heapq.heappush(heap, (-g, i, l))
            else:
                heapq.heappush(heap, (-g, l, i))
    return (
        np.asarray(out_a, dtype=np.int64),
        np.asarray(out_b, dtype=np.int64),
        np.asarray(out_g, dtype=np.float64),
    )
