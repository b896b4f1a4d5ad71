# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Signatures mirror ``_fallback`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t

cnp.import_array()


def dinic(int64_t n_nodes, int64_t source, int64_t sink,
          const int64_t[::1] head, const int64_t[::1] to,
          int64_t[::1] cap, const int64_t[::1] rev):
    """Max-flow on a CSR residual graph; ``cap`` is updated in place."""
    cdef int64_t[::1] level = np.empty(n_nodes, dtype=np.int64)
    cdef int64_t[::1] it = np.empty(n_nodes, dtype=np.int64)
    cdef int64_t[::1] queue = np.empty(n_nodes, dtype=np.int64)
    cdef int64_t[::1] path = np.empty(n_nodes + 1, dtype=np.int64)
    cdef int64_t total = 0
    cdef int64_t qh, qt, u, v, a, depth, k, push, cut
    with nogil:
        while True:
            for u in range(n_nodes):
                level[u] = -1
            level[source] = 0
            qh = 0
            qt = 0
            queue[qt] = source
            qt += 1
            while qh < qt:
                u = queue[qh]
                qh += 1
                for a in range(head[u], head[u + 1]):
                    v = to[a]
                    if cap[a] > 0 and level[v] < 0:
                        level[v] = level[u] + 1
                        queue[qt] = v
                        qt += 1
            if level[sink] < 0:
                break
            for u in range(n_nodes):
                it[u] = head[u]
            depth = 0
            u = source
            while True:
                if u == sink:
                    push = cap[path[0]]
                    for k in range(1, depth):
                        if cap[path[k]] < push:
                            push = cap[path[k]]
                    cut = -1
                    for k in range(depth):
                        a = path[k]
                        cap[a] -= push
                        cap[rev[a]] += push
                        if cut < 0 and cap[a] == 0:
                            cut = k
                    total += push
                    depth = cut
                    u = source if cut == 0 else to[path[cut - 1]]
                    continue
                a = it[u]
                while a < head[u + 1]:
                    v = to[a]
                    if cap[a] > 0 and level[v] == level[u] + 1:
                        break
                    a += 1
                it[u] = a
                if a < head[u + 1]:
                    path[depth] = a
                    depth += 1
                    u = to[a]
                else:
                    level[u] = -1
                    if depth == 0:
                        break
                    depth -= 1
                    u = source if depth == 0 else to[path[depth - 1]]
                    it[u] += 1
    return total


def interval_flow(const double[::1] x, const int64_t[::1] xcap,
                  const double[::1] y, const int64_t[::1] ycap,
                  double eps, bint inclusive):
    cdef Py_ssize_t n = x.shape[0], m = y.shape[0]
    cdef int64_t[::1] rem = np.array(xcap, dtype=np.int64, copy=True)
    cdef Py_ssize_t lo = 0, p = 0, j
    cdef int64_t need, take, total = 0
    if not inclusive and eps <= 0:
        return 0
    with nogil:
        for j in range(m):
            need = ycap[j]
            while lo < n and x[lo] < y[j] and (
                    (y[j] - x[lo] > eps) if inclusive else (y[j] - x[lo] >= eps)):
                lo += 1
            if p < lo:
                p = lo
            while need > 0 and p < n:
                if x[p] > y[j] and (
                        (x[p] - y[j] > eps) if inclusive else (x[p] - y[j] >= eps)):
                    break
                take = rem[p] if rem[p] < need else need
                rem[p] -= take
                need -= take
                total += take
                if rem[p] == 0:
                    p += 1
    return total


def partial_diameter_sorted(const double[::1] values, const double[::1] cum, double thr):
    cdef Py_ssize_t m = values.shape[0], i, j = 0
    cdef double best = 0.0, length, target
    cdef Py_ssize_t bi = -1, bj = -1
    with nogil:
        for i in range(m):
            if j < i:
                j = i
            target = cum[i] + thr
            while j < m and cum[j + 1] < target:
                j += 1
            if j == m:
                break
            length = values[j] - values[i]
            if bi < 0 or length < best:
                best = length
                bi = i
                bj = j
    return best, bi, bj


def me_shift_scan(const double[::1] h, const double[::1] cum):
    cdef Py_ssize_t m = h.shape[0], i, j, lo, hi, mid, jj
    cdef double best = 1.0, target, cand, width, miss
    cdef Py_ssize_t bi = -1, bj = -1
    with nogil:
        for i in range(m):
            target = 1.0 + cum[i] + 0.5 * h[i]
            lo = i
            hi = m
            while lo < hi:
                mid = (lo + hi) // 2
                if 0.5 * h[mid] + cum[mid + 1] < target:
                    lo = mid + 1
                else:
                    hi = mid
            for jj in range(lo - 1, lo + 2):
                if jj < i or jj >= m:
                    continue
                width = 0.5 * (h[jj] - h[i])
                miss = 1.0 - (cum[jj + 1] - cum[i])
                cand = width if width > miss else miss
                if cand < best:
                    best = cand
                    bi = i
                    bj = jj
    return best, bi, bj


def sep2_exhaustive(const double[:, ::1] dist, const int64_t[::1] w,
                    int64_t t0, int64_t t1):
    cdef Py_ssize_t n = dist.shape[0], x, k, l, b
    cdef Py_ssize_t n_masks = (<Py_ssize_t>1) << n
    cdef double[:, ::1] table = np.empty((n_masks, n), dtype=np.float64)
    cdef int64_t[::1] mass = np.zeros(n_masks, dtype=np.int64)
    cdef double[::1] vals = np.empty(n, dtype=np.float64)
    cdef int64_t[::1] ws = np.empty(n, dtype=np.int64)
    cdef double best = 0.0, v, tv
    cdef int64_t acc, tw
    cdef Py_ssize_t mask, low, prev, best_mask = -1
    with nogil:
        for x in range(n):
            table[0, x] = 1e308
        for mask in range(1, n_masks):
            low = 0
            while not (mask >> low) & 1:
                low += 1
            prev = mask & (mask - 1)
            mass[mask] = mass[prev] + w[low]
            for x in range(n):
                v = dist[low, x]
                table[mask, x] = v if v < table[prev, x] else table[prev, x]
            if mass[mask] < t0:
                continue
            for x in range(n):
                vals[x] = table[mask, x]
                ws[x] = w[x]
            # insertion sort, descending by value
            for k in range(1, n):
                tv = vals[k]
                tw = ws[k]
                l = k - 1
                while l >= 0 and vals[l] < tv:
                    vals[l + 1] = vals[l]
                    ws[l + 1] = ws[l]
                    l -= 1
                vals[l + 1] = tv
                ws[l + 1] = tw
            acc = 0
            for k in range(n):
                acc += ws[k]
                if acc >= t1:
                    if best_mask < 0 or vals[k] > best:
                        best = vals[k]
                        best_mask = mask
                    break
    return best, best_mask


def peel(const cnp.uint8_t[:, ::1] conflict, const int64_t[::1] mass):
    """Greedy removal of the most-conflicted cell until the set is conflict free."""
    cdef Py_ssize_t c = conflict.shape[0], i, j, r
    cdef int64_t[::1] viol = np.zeros(c, dtype=np.int64)
    cdef cnp.uint8_t[::1] alive = np.ones(c, dtype=np.uint8)
    cdef int64_t worst
    with nogil:
        for i in range(c):
            for j in range(c):
                if conflict[i, j]:
                    viol[i] += mass[j]
        while True:
            r = -1
            worst = 0
            for i in range(c):
                if alive[i] and viol[i] > worst:
                    worst = viol[i]
                    r = i
            if r < 0:
                break
            alive[r] = 0
            for i in range(c):
                if conflict[i, r]:
                    viol[i] -= mass[r]
    return np.asarray(alive).astype(bool)
