"""Brute-force reference computations, written from the definitions.

None of these call into the package's solvers; they enumerate subsets,
windows or thresholds directly and are only fit for tiny inputs.
"""

from itertools import combinations, product
from math import erf, sqrt

import numpy as np
from scipy.optimize import brentq, linprog
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_flow
from scipy.stats import norm


def subsets(n):
    for k in range(n + 1):
        for c in combinations(range(n), k):
            yield list(c)


def min_cut_value(cap_left, cap_right, edges):
    """Bipartite max-flow value via brute-force minimum cut.

    With uncapacitated middle edges a cut picks left set L (cut from the
    source side) and must then cut every right neighbour of the rest.
    """
    n = len(cap_left)
    best = None
    for mask in range(1 << n):
        keep = [i for i in range(n) if not (mask >> i) & 1]
        cut = sum(cap_left[i] for i in range(n) if (mask >> i) & 1)
        nbrs = {j for i, j in edges if i in keep}
        cut += sum(cap_right[j] for j in nbrs)
        best = cut if best is None else min(best, cut)
    return best


def scipy_flow(cap_left, cap_right, edges):
    n, m = len(cap_left), len(cap_right)
    s, t = 0, n + m + 1
    big = int(sum(cap_left)) + 1
    rows, cols, caps = [], [], []
    for i, c in enumerate(cap_left):
        rows.append(s); cols.append(1 + i); caps.append(int(c))
    for j, c in enumerate(cap_right):
        rows.append(1 + n + j); cols.append(t); caps.append(int(c))
    for i, j in set(edges):
        rows.append(1 + i); cols.append(1 + n + j); caps.append(big)
    g = csr_matrix((np.array(caps, dtype=np.int32), (rows, cols)), shape=(n + m + 2, n + m + 2))
    return int(maximum_flow(g, s, t).flow_value)


def partial_diameter_windows(values, weights, alpha):
    """Smallest diameter over every contiguous block with mass ≥ alpha."""
    if alpha <= 0 or alpha > 1:
        return 0.0
    order = np.argsort(values, kind="stable")
    v = np.asarray(values, float)[order]
    w = np.asarray(weights, float)[order]
    best = np.inf
    for i in range(len(v)):
        for j in range(i, len(v)):
            if w[i:j + 1].sum() >= alpha - 1e-12:
                best = min(best, v[j] - v[i])
                break
    return 0.0 if best == np.inf else best


def separation_definition(D, w, k0, k1):
    """max over (A0, A1) of d(A0, A1), by assigning each point to A0, A1 or neither."""
    n = len(w)
    best = 0.0
    for labels in product((0, 1, 2), repeat=n):
        A0 = [i for i in range(n) if labels[i] == 0]
        A1 = [i for i in range(n) if labels[i] == 1]
        if not A0 or not A1:
            continue
        if w[A0].sum() < k0 - 1e-12 or w[A1].sum() < k1 - 1e-12:
            continue
        best = max(best, D[np.ix_(A0, A1)].min())
    return best


def prokhorov_definition(D, a, b):
    """inf eps with mu(U_eps(A)) ≥ nu(A) - eps and the mirrored condition, all A.

    On (t_k, t_{k+1}] between consecutive distinct distances the open
    neighbourhoods are constant, so the worst deficit g_k is constant there
    and the infimum is max(t_k, g_k) on the first interval where it fits.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    ts = np.unique(np.concatenate([[0.0], D.ravel()]))

    def deficit(eps_inside):
        # neighbourhoods for eps slightly above eps_inside: d <= eps_inside
        worst = 0.0
        for A in subsets(len(b)):
            if A:
                nb = np.nonzero((D[:, A] <= eps_inside).any(axis=1))[0]
                worst = max(worst, b[A].sum() - a[nb].sum())
        for A in subsets(len(a)):
            if A:
                nb = np.nonzero((D[A, :] <= eps_inside).any(axis=0))[0]
                worst = max(worst, a[A].sum() - b[nb].sum())
        return worst

    # interval (0, t_0] when t_0 > 0: neighbourhoods are empty
    cands = [1.0]
    if ts[0] > 0:
        g = max(a.sum(), b.sum())
        if g <= ts[0]:
            cands.append(g)
    for k, t in enumerate(ts):
        nxt = ts[k + 1] if k + 1 < len(ts) else np.inf
        g = deficit(t)
        if max(t, g) <= nxt:
            cands.append(max(t, g))
    return float(min(cands))


def me_definition(f, g, w):
    """Check every candidate eps (a difference or a tail mass) directly."""
    d = np.abs(np.asarray(f, float) - np.asarray(g, float))
    w = np.asarray(w, float)
    cands = set(d.tolist()) | {0.0}
    for e in list(cands):
        cands.add(float(w[d > e].sum()))
    return min(e for e in cands if w[d > e].sum() <= e + 1e-15)


def me_shift_bruteforce(f, g, w):
    h = np.asarray(g, float) - np.asarray(f, float)
    ts = {0.5 * (x + y) for x in h for y in h}
    return min(me_definition(np.asarray(f) + t, g, w) for t in ts)


def box_definition(DX, wx, DY, wy):
    """min over cell sets S of max(max distortion in S, 1 - best coupling mass on S).

    The coupling mass is an LP over transport plans supported on S, solved
    with scipy's HiGHS.
    """
    nx, ny = len(wx), len(wy)
    cells = [(i, j) for i in range(nx) for j in range(ny)]
    best = 1.0
    for mask in range(1, 1 << len(cells)):
        S = [cells[k] for k in range(len(cells)) if (mask >> k) & 1]
        t = 0.0
        for (i, j), (k, l) in combinations(S, 2):
            t = max(t, abs(DX[i, k] - DY[j, l]))
        if t >= best:
            continue
        # maximize mass on S subject to row/column caps
        A = np.zeros((nx + ny, len(S)))
        for c, (i, j) in enumerate(S):
            A[i, c] = 1
            A[nx + j, c] = 1
        res = linprog(-np.ones(len(S)), A_ub=A, b_ub=np.concatenate([wx, wy]),
                      bounds=(0, None), method="highs")
        best = min(best, max(t, 1 + res.fun))
    return best


def inv_interval(p):
    """I^{-1}(p) through the normal quantile function."""
    return float(norm.ppf(0.5 + p))


def nonconc_root():
    # 2(1 - Phi(e / sqrt 2)) written with erf
    return brentq(lambda e: 1 - erf(e / 2) - e, 0.1, 1.0, xtol=1e-14)


def rayleigh_window_grid(alpha, h=2e-5, top=12.0):
    """Trapezoid CDF of r exp(-r^2/2) on a grid, then a two-pointer sweep."""
    r = np.arange(0.0, top, h)
    dens = r * np.exp(-r * r / 2)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * h)])
    j = np.searchsorted(cdf, cdf + alpha)
    ok = j < len(r)
    return float((r[j[ok]] - r[ok]).min())


def chi_annulus(n, theta):
    from scipy.stats import chi

    return float(chi.cdf(sqrt(n) / theta, n + 1) - chi.cdf(theta * sqrt(n), n + 1))
