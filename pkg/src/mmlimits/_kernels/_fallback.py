"""Pure-Python/numpy versions of the compiled kernels.

Each function returns bit-identical results to its counterpart in ``_core``;
the parity tests in ``tests/test_kernels.py`` hold both to that.
"""

from collections import deque

import numpy as np


def dinic(n_nodes, source, sink, head, to, cap, rev):
    head = head.tolist()
    to = to.tolist()
    rev = rev.tolist()
    c = cap.tolist()
    total = 0
    while True:
        level = [-1] * n_nodes
        level[source] = 0
        q = deque([source])
        while q:
            u = q.popleft()
            for a in range(head[u], head[u + 1]):
                v = to[a]
                if c[a] > 0 and level[v] < 0:
                    level[v] = level[u] + 1
                    q.append(v)
        if level[sink] < 0:
            break
        it = head[:-1]
        path = []
        u = source
        while True:
            if u == sink:
                push = min(c[a] for a in path)
                cut = -1
                for k, a in enumerate(path):
                    c[a] -= push
                    c[rev[a]] += push
                    if cut < 0 and c[a] == 0:
                        cut = k
                total += push
                del path[cut:]
                u = to[path[-1]] if path else source
                continue
            a = it[u]
            end = head[u + 1]
            while a < end and not (c[a] > 0 and level[to[a]] == level[u] + 1):
                a += 1
            it[u] = a
            if a < end:
                path.append(a)
                u = to[a]
            else:
                level[u] = -1
                if not path:
                    break
                path.pop()
                u = to[path[-1]] if path else source
                it[u] += 1
    cap[:] = c
    return total


def interval_flow(x, xcap, y, ycap, eps, inclusive):
    n, m = len(x), len(y)
    if not inclusive and eps <= 0:
        return 0
    rem = [int(v) for v in xcap]
    x = x.tolist()
    lo = p = total = 0
    for j in range(m):
        yj = float(y[j])
        need = int(ycap[j])
        while lo < n and x[lo] < yj and (
                (yj - x[lo] > eps) if inclusive else (yj - x[lo] >= eps)):
            lo += 1
        if p < lo:
            p = lo
        while need > 0 and p < n:
            if x[p] > yj and ((x[p] - yj > eps) if inclusive else (x[p] - yj >= eps)):
                break
            take = min(rem[p], need)
            rem[p] -= take
            need -= take
            total += take
            if rem[p] == 0:
                p += 1
    return total


def partial_diameter_sorted(values, cum, thr):
    m = len(values)
    if m == 0:
        return 0.0, -1, -1
    target = cum[:-1] + thr
    t = np.searchsorted(cum, target, side="left")
    ok = t <= m
    if not ok.any():
        return 0.0, -1, -1
    i = np.nonzero(ok)[0]
    j = t[ok] - 1
    lengths = values[j] - values[i]
    k = int(np.argmin(lengths))
    return float(lengths[k]), int(i[k]), int(j[k])


def me_shift_scan(h, cum):
    m = len(h)
    i = np.arange(m)
    g = 0.5 * h + cum[1:]
    target = 1.0 + cum[:-1] + 0.5 * h
    lo = np.searchsorted(g, target, side="left")
    lo = np.maximum(lo, i)
    best, bi, bj = 1.0, -1, -1
    cands = []
    for off in (-1, 0, 1):
        jj = lo + off
        ok = (jj >= i) & (jj < m)
        ii, jj = i[ok], jj[ok]
        width = 0.5 * (h[jj] - h[ii])
        miss = 1.0 - (cum[jj + 1] - cum[ii])
        cands.append((np.maximum(width, miss), ii, jj))
    # replicate the compiled loop order: by i, then offset
    vals = np.concatenate([c[0] for c in cands])
    ii = np.concatenate([c[1] for c in cands])
    jj = np.concatenate([c[2] for c in cands])
    order = np.lexsort((jj, ii))
    vals, ii, jj = vals[order], ii[order], jj[order]
    if len(vals):
        k = int(np.argmin(vals))
        if vals[k] < best:
            best, bi, bj = float(vals[k]), int(ii[k]), int(jj[k])
    return best, bi, bj


def sep2_exhaustive(dist, w, t0, t1):
    n = dist.shape[0]
    n_masks = 1 << n
    table = np.empty((n_masks, n))
    table[0] = np.inf
    mass = np.zeros(n_masks, dtype=np.int64)
    for b in range(n):
        lo, hi = 1 << b, 1 << (b + 1)
        table[lo:hi] = np.minimum(table[:lo], dist[b])
        mass[lo:hi] = mass[:lo] + w[b]
    cand = np.nonzero(mass >= t0)[0]
    cand = cand[cand > 0]
    if len(cand) == 0:
        return 0.0, -1
    rows = table[cand]
    # descending by value; stable so equal values keep index order like insertion sort
    order = np.argsort(-rows, axis=1, kind="stable")
    vals = np.take_along_axis(rows, order, axis=1)
    acc = np.cumsum(w[order], axis=1)
    reach = acc >= t1
    has = reach.any(axis=1)
    if not has.any():
        return 0.0, -1
    first = np.argmax(reach, axis=1)
    v = vals[np.arange(len(cand)), first]
    v = np.where(has, v, -np.inf)
    k = int(np.argmax(v))
    return float(v[k]), int(cand[k])


def peel(conflict, mass):
    conflict = conflict.astype(bool)
    mass = np.asarray(mass, dtype=np.int64)
    viol = conflict.astype(np.int64) @ mass
    alive = np.ones(len(mass), dtype=bool)
    while True:
        masked = np.where(alive, viol, 0)
        r = int(np.argmax(masked))
        if masked[r] <= 0:
            break
        alive[r] = False
        viol -= conflict[:, r] * mass[r]
    return alive
