"""me-metric, Prokhorov distance, Hausdorff distance of measure sets, box distance."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import _kernels
from ._util import integer_masses, rng
from .mmspace import Coupling, FiniteMMSpace, merge_atoms

GALLOP_START = 2.0 ** -10
# 1-D path: bisect until at most this many candidate distances remain
ENUMERATE_MAX = 2048
BOX_TINY_MAX = 25


# -- me ----------------------------------------------------------------------

def me_distance(f, g, weights=None, optimize_shift: bool = False, return_shift: bool = False):
    """Smallest eps with mass{|f - g| > eps} ≤ eps.

    With ``optimize_shift`` the infimum over constant shifts ``f + t`` is
    taken as well (the distance between classes modulo constants); it is
    computed exactly from the sorted differences, and ``return_shift`` also
    returns an optimal ``t``.
    """
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape != g.shape:
        raise ValueError("f and g must have equal length")
    w = np.full(len(f), 1.0 / len(f)) if weights is None else np.asarray(weights, dtype=float)
    if len(f) == 0:
        return (0.0, 0.0) if return_shift else 0.0
    # same normalization as the integer masses used by prokhorov
    w = w / w.sum()
    if not optimize_shift:
        v = _me_scan(np.abs(f - g), w)
        return (v, 0.0) if return_shift else v
    h = g - f
    order = np.argsort(h, kind="stable")
    hs = np.ascontiguousarray(h[order])
    cum = np.concatenate([[0.0], np.cumsum(w[order])])
    best, i, j = _kernels.get().me_shift_scan(hs, cum)
    t = 0.5 * (hs[i] + hs[j]) if i >= 0 else 0.0
    # the window formula and the plain scan agree at the optimal shift
    best = min(best, _me_scan(np.abs(f + t - g), w))
    return (float(best), float(t)) if return_shift else float(best)


def _me_scan(diff, w):
    order = np.argsort(diff, kind="stable")
    v = diff[order]
    ws = w[order]
    uniq, first = np.unique(v, return_index=True)
    suffix = np.concatenate([np.cumsum(ws[::-1])[::-1], [0.0]])
    # on [left[k], right[k]) the mass above eps is the constant tail[k]
    left = np.concatenate([[0.0], uniq])
    right = np.concatenate([uniq, [np.inf]])
    tail = suffix[np.append(first, len(v))]
    cand = np.maximum(left, tail)
    ok = cand < right
    return float(cand[ok].min())


# -- Prokhorov ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MeasureOnCommonSpace:
    """Weights over the points of a fixed ground space."""

    ground: FiniteMMSpace
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.ground.size,) or (w < 0).any() or abs(w.sum() - 1) > 1e-12:
            raise ValueError("weights must be a probability vector over the ground points")
        object.__setattr__(self, "weights", w)


class _Instance:
    """Integer-mass transport instance with an edge oracle by distance."""

    def __init__(self, a, b, den):
        self.a, self.b, self.den = a, b, den

    def flow_at(self, eps, inclusive):
        raise NotImplementedError

    def distances_between(self, lo, hi):
        raise NotImplementedError


class _MatrixInstance(_Instance):
    def __init__(self, a, b, den, D):
        super().__init__(a, b, den)
        self.D = D

    def _edges(self, eps, inclusive):
        mask = self.D <= eps if inclusive else self.D < eps
        return np.nonzero(mask)

    def flow_at(self, eps, inclusive):
        el, er = self._edges(eps, inclusive)
        return _kernels.max_flow(self.a, self.b, el, er)

    def distances_between(self, lo, hi):
        d = self.D[(self.D > lo) & (self.D < hi)]
        return np.unique(d)


class _CloudInstance(_Instance):
    """Point clouds in R^N with the l-infinity (or Euclidean) metric; edges by KD-tree."""

    def __init__(self, a, b, den, xa, xb, p):
        super().__init__(a, b, den)
        self.ta, self.tb, self.p = cKDTree(xa), cKDTree(xb), p
        self._radius = -1.0
        self._pairs = None

    def _within(self, r):
        if r > self._radius:
            sdm = self.ta.sparse_distance_matrix(self.tb, r, p=self.p, output_type="ndarray")
            self._pairs = (sdm["i"].astype(np.int64), sdm["j"].astype(np.int64), sdm["v"])
            self._radius = r
        return self._pairs

    def flow_at(self, eps, inclusive):
        i, j, v = self._within(eps)
        keep = v <= eps if inclusive else v < eps
        return _kernels.max_flow(self.a, self.b, i[keep], j[keep])

    def distances_between(self, lo, hi):
        _, _, v = self._within(hi)
        return np.unique(v[(v > lo) & (v < hi)])


class _LineInstance(_Instance):
    def __init__(self, a, b, den, x, y):
        super().__init__(a, b, den)
        self.x, self.y = np.ascontiguousarray(x), np.ascontiguousarray(y)

    def flow_at(self, eps, inclusive):
        if not inclusive and eps <= 0:
            return 0
        # x side supplies, y side demands; the kernel sweeps y in order
        return int(_kernels.get().interval_flow(self.x, self.a, self.y, self.b, float(eps),
                                                bool(inclusive)))

    def count_between(self, lo, hi):
        x, y = self.x, self.y
        pad = 4 * np.finfo(float).eps * (1 + np.abs(y).max() + hi)
        n_hi = np.searchsorted(x, y + hi + pad, "right") - np.searchsorted(x, y - hi - pad, "left")
        n_lo = np.searchsorted(x, y + lo - pad, "left") - np.searchsorted(x, y - lo + pad, "right")
        return int(n_hi.sum() - np.maximum(n_lo, 0).sum())

    def distances_between(self, lo, hi):
        x, y = self.x, self.y
        pad = 4 * np.finfo(float).eps * (1 + np.abs(y).max() + hi)
        s = np.searchsorted(x, y - hi - pad, "left")
        e = np.searchsorted(x, y + hi + pad, "right")
        counts = e - s
        rows = np.repeat(np.arange(len(y)), counts)
        offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
        d = np.abs(x[s[rows] + offs] - y[rows])
        return np.unique(d[(d > lo) & (d < hi)])


def _need_met(inst, flow, eps):
    """flow/den ≥ 1 - eps, decided in integers where possible."""
    return (inst.den - flow) / inst.den <= eps


def _prokhorov_solve(inst: _Instance) -> float:
    # gallop to a feasible upper end
    lo, hi = 0.0, GALLOP_START
    while hi < 1.0 and not _need_met(inst, inst.flow_at(hi, False), hi):
        lo, hi = hi, 2 * hi
    hi = min(hi, 1.0)
    if isinstance(inst, _LineInstance):
        for _ in range(200):
            if inst.count_between(lo, hi) <= ENUMERATE_MAX:
                break
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if _need_met(inst, inst.flow_at(mid, False), mid):
                hi = mid
            else:
                lo = mid
    ts = inst.distances_between(lo, hi)
    starts = np.concatenate([[lo], ts])
    ends = np.concatenate([ts, [hi]])
    cache = {}

    def gap(k):
        if k not in cache:
            cache[k] = (inst.den - inst.flow_at(starts[k], True)) / inst.den
        return cache[k]

    a, b = 0, len(starts) - 1
    while a < b:
        mid = (a + b) // 2
        if gap(mid) <= ends[mid]:
            b = mid
        else:
            a = mid + 1
    return float(min(max(starts[a], gap(a)), 1.0))


def _as_cloud(m):
    pts = np.asarray(m.points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    return pts, np.asarray(m.weights, dtype=float)


def prokhorov(mu, nu, p=np.inf) -> float:
    """Exact Prokhorov distance between two finitely supported measures.

    ``mu`` and ``nu`` are either two :class:`MeasureOnCommonSpace` over the
    same ground space, or two point clouds (objects with ``points`` and
    ``weights``, e.g. :class:`~mmlimits.measurements.MeasureOnRN` or
    :class:`~mmlimits.invariants.ScalarPushforward`) compared in R^N with the
    l-infinity metric (``p=2`` for Euclidean).

    A level eps is feasible iff the transport over pairs at distance < eps
    moves mass ≥ 1 - eps; the value is the infimum of the feasible levels,
    located exactly among the distinct pairwise distances and the flow gaps.
    """
    if isinstance(mu, MeasureOnCommonSpace) or isinstance(nu, MeasureOnCommonSpace):
        if not (isinstance(mu, MeasureOnCommonSpace) and isinstance(nu, MeasureOnCommonSpace)):
            raise ValueError("mismatched ground sets")
        if mu.ground is not nu.ground and not (
                mu.ground.size == nu.ground.size and np.array_equal(mu.ground.dist, nu.ground.dist)):
            raise ValueError("mismatched ground sets")
        sa, sb = np.nonzero(mu.weights > 0)[0], np.nonzero(nu.weights > 0)[0]
        (a, b), den = integer_masses(mu.weights[sa], nu.weights[sb])
        D = mu.ground.dist[np.ix_(sa, sb)]
        return _prokhorov_solve(_MatrixInstance(a, b, den, D))
    if hasattr(mu, "values") and not hasattr(mu, "points"):
        xa, wa = np.asarray(mu.values, float)[:, None], mu.weights
        xb, wb = np.asarray(nu.values, float)[:, None], nu.weights
    else:
        xa, wa = _as_cloud(mu)
        xb, wb = _as_cloud(nu)
    if xa.shape[1] != xb.shape[1]:
        raise ValueError("mismatched ground sets: different dimensions")
    xa, wa = merge_atoms(xa, wa)
    xb, wb = merge_atoms(xb, wb)
    (a, b), den = integer_masses(wa, wb)
    if xa.shape[1] == 1:
        return _prokhorov_solve(_LineInstance(a, b, den, xa[:, 0], xb[:, 0]))
    return _prokhorov_solve(_CloudInstance(a, b, den, xa, xb, p))


def prokhorov_matrix(D, a, b) -> float:
    """Prokhorov distance from a cross-distance matrix and two weight vectors."""
    D = np.asarray(D, dtype=float)
    (ai, bi), den = integer_masses(a, b)
    return _prokhorov_solve(_MatrixInstance(ai, bi, den, D))


def prokhorov_at_most(mu, nu, eps, p=np.inf) -> bool:
    """Whether d_P(mu, nu) < eps, from a single flow check at level eps."""
    xa, wa = merge_atoms(*_as_cloud(mu))
    xb, wb = merge_atoms(*_as_cloud(nu))
    (a, b), den = integer_masses(wa, wb)
    if xa.shape[1] == 1:
        inst = _LineInstance(a, b, den, xa[:, 0], xb[:, 0])
    else:
        inst = _CloudInstance(a, b, den, xa, xb, p)
    return eps > 0 and _need_met(inst, inst.flow_at(eps, False), eps)


def hausdorff_measures(A, B, p=np.inf) -> float:
    """Hausdorff distance between two finite sets of measures under d_P."""
    A, B = list(A), list(B)
    if not A or not B:
        raise ValueError("empty measure set")
    H = 0.0
    for left, right in ((A, B), (B, A)):
        for alpha in left:
            # alpha cannot raise H if some beta is already within H of it
            if H > 0 and any(prokhorov_at_most(alpha, beta, H, p) for beta in right):
                continue
            H = max(H, min(prokhorov(alpha, beta, p) for beta in right))
    return H


# -- box distance ------------------------------------------------------------

def _cells(X, Y):
    ii, jj = np.meshgrid(np.arange(X.size), np.arange(Y.size), indexing="ij")
    return ii.ravel(), jj.ravel()


def _distortion(X, Y, ci, cj):
    return np.abs(X.dist[np.ix_(ci, ci)] - Y.dist[np.ix_(cj, cj)])


def _clique_flow(a, b, ci, cj, members):
    members = np.asarray(members, dtype=np.int64)
    if len(members) == 0:
        return 0
    return _kernels.max_flow(a, b, ci[members], cj[members])


def box_exact_tiny(X: FiniteMMSpace, Y: FiniteMMSpace) -> float:
    """Exact box distance for |X|·|Y| ≤ 25 via couplings.

    A level eps is feasible iff some coupling puts mass ≥ 1 - eps on a set of
    cells (x, y) whose pairwise distortions |d_X - d_Y| are all ≤ eps. For a
    fixed cell set the best coupling mass is a max-flow, so each distinct
    distortion level is settled by enumerating the maximal cliques of the
    compatibility graph.
    """
    import networkx as nx

    if X.size * Y.size > BOX_TINY_MAX:
        raise ValueError(f"box_exact_tiny limited to |X|·|Y| ≤ {BOX_TINY_MAX}")
    ci, cj = _cells(X, Y)
    dis = _distortion(X, Y, ci, cj)
    (a, b), den = integer_masses(X.weights, Y.weights)
    best = 1.0
    for t in np.unique(dis):
        if t >= best:
            break
        G = nx.Graph()
        G.add_nodes_from(range(len(ci)))
        G.add_edges_from(zip(*np.nonzero(np.triu(dis <= t, 1))))
        fbest = max(_clique_flow(a, b, ci, cj, c) for c in nx.find_cliques(G))
        best = min(best, max(float(t), (den - fbest) / den))
    return best


@dataclass
class BoxResult:
    value: float
    coupling: Coupling | None = field(default=None, repr=False)
    threshold: float = 0.0
    kept_mass: float = 0.0

    def to_json(self):
        out = {"value": self.value, "threshold": self.threshold, "kept_mass": self.kept_mass}
        if self.coupling is not None:
            out["coupling"] = self.coupling.triplets()
        return out


def _complete_plan(X, Y, a, b, den, ci, cj, members):
    """Coupling carrying the max-flow on ``members`` and arbitrary mass elsewhere."""
    members = np.asarray(members, dtype=np.int64)
    plan = np.zeros((X.size, Y.size))
    ra, rb = a.astype(np.int64).copy(), b.astype(np.int64).copy()
    if len(members):
        _, flows = _kernels.max_flow(a, b, ci[members], cj[members], return_flows=True)
        for k, fl in zip(members, flows):
            plan[ci[k], cj[k]] += fl
            ra[ci[k]] -= fl
            rb[cj[k]] -= fl
    i = j = 0
    while i < len(ra) and j < len(rb):
        t = min(ra[i], rb[j])
        plan[i, j] += t
        ra[i] -= t
        rb[j] -= t
        if ra[i] == 0:
            i += 1
        if rb[j] == 0:
            j += 1
    return plan / den


def box_upper(X: FiniteMMSpace, Y: FiniteMMSpace, restarts: int = 32, seed: int = 0,
              tiny_cells: int = 64, gw_iters: int = 20, thresholds: int = 96) -> BoxResult:
    """Upper bound for the box distance by local search over couplings.

    Small instances search cell cliques directly (randomized greedy growth
    plus swap moves, flow-optimal coupling on the clique). Larger ones build
    couplings by linearized Gromov-Wasserstein steps and then peel the
    most-distorted cells at each of a grid of distortion levels. Every value
    returned is attained by an explicit coupling and cell set.
    """
    (a, b), den = integer_masses(X.weights, Y.weights)
    if X.size * Y.size <= tiny_cells:
        return _box_local_tiny(X, Y, a, b, den, restarts, seed)
    return _box_gw(X, Y, a, b, den, restarts, seed, gw_iters, thresholds)


def _box_local_tiny(X, Y, a, b, den, restarts, seed):
    ci, cj = _cells(X, Y)
    dis = _distortion(X, Y, ci, cj)
    n = len(ci)
    g = rng(seed, 0xB0)
    # the flow of a cell set does not depend on the threshold
    flow_cache = {}

    def value(members):
        key = tuple(sorted(members))
        if key not in flow_cache:
            flow_cache[key] = _clique_flow(a, b, ci, cj, key)
        return flow_cache[key]

    best, best_t, best_members, best_f = 1.0, 1.0, [], 0
    carry = []
    for t in np.unique(dis):
        if t >= best:
            break
        compat = dis <= t
        # conflict sets as bitmasks (at most 64 cells here)
        conflict = [sum(1 << int(k) for k in np.nonzero(~row)[0]) for row in compat]

        def grow(clique, order):
            inside = 0
            for c in clique:
                inside |= 1 << c
            for c in order:
                if not (inside >> c) & 1 and not conflict[c] & inside:
                    inside |= 1 << c
                    clique.append(c)
            return clique

        fbest, mbest = -1, []
        greedy = np.argsort(-(a[ci] + b[cj]), kind="stable").tolist()
        starts = [(list(carry), greedy)] if carry else []
        starts += [([c], greedy) for c in greedy]
        for _ in range(max(restarts, 1) - 1):
            order = g.permutation(n).tolist()
            starts.append(([order[0]], order))
        for clique, order in starts:
            clique = grow(clique, order)
            cur = value(clique)
            improved = True
            while improved:
                improved = False
                # swap: add an outside cell, drop its conflicts, regrow greedily
                for c in range(n):
                    if c in clique:
                        continue
                    cand = grow([k for k in clique if not (conflict[c] >> k) & 1] + [c], order)
                    v = value(cand)
                    if v > cur:
                        clique, cur, improved = cand, v, True
            if cur > fbest:
                fbest, mbest = cur, list(clique)
        carry = mbest
        v = max(float(t), (den - fbest) / den)
        if v < best:
            best, best_t, best_members, best_f = v, float(t), mbest, fbest
    plan = _complete_plan(X, Y, a, b, den, ci, cj, best_members)
    return BoxResult(best, Coupling(plan, X, Y), best_t, best_f / den)


def _transport_step(cost, a, b):
    """Optimal plan for a linear cost with integer marginals ``a``, ``b``."""
    from scipy.optimize import linear_sum_assignment, linprog

    n, m = cost.shape
    if n == m and np.all(a == a[0]) and np.all(b == b[0]) and a[0] == b[0]:
        r, c = linear_sum_assignment(cost)
        plan = np.zeros((n, m), dtype=np.int64)
        plan[r, c] = a[0]
        return plan
    if n * m <= 40_000:
        A_eq = np.zeros((n + m, n * m))
        for i in range(n):
            A_eq[i, i * m:(i + 1) * m] = 1
        for j in range(m):
            A_eq[n + j, j::m] = 1
        res = linprog(cost.ravel(), A_eq=A_eq, b_eq=np.concatenate([a, b]).astype(float),
                      bounds=(0, None), method="highs")
        if res.status == 0:
            return _round_plan(res.x.reshape(n, m), a, b)
    # northwest corner along the orderings of the cheapest rows/columns
    return _northwest(np.argsort(cost.mean(1)), np.argsort(cost.mean(0)), a, b)


def _northwest(ri, cj, a, b):
    plan = np.zeros((len(a), len(b)), dtype=np.int64)
    ra, rb = a.copy(), b.copy()
    i = j = 0
    while i < len(ri) and j < len(cj):
        t = min(ra[ri[i]], rb[cj[j]])
        plan[ri[i], cj[j]] += t
        ra[ri[i]] -= t
        rb[cj[j]] -= t
        if ra[ri[i]] == 0:
            i += 1
        if rb[cj[j]] == 0:
            j += 1
    return plan


def _round_plan(x, a, b):
    """Integer plan close to a fractional one with exact integer marginals."""
    plan = np.floor(x + 1e-9).astype(np.int64)
    ra = a - plan.sum(1)
    rb = b - plan.sum(0)
    fill = _northwest(np.arange(len(a)), np.arange(len(b)), np.maximum(ra, 0), np.maximum(rb, 0))
    return plan + fill


def _box_gw(X, Y, a, b, den, restarts, seed, gw_iters, n_thresholds):
    DX, DY = X.dist, Y.dist
    g = rng(seed, 0xB1)
    pa, pb = X.weights, Y.weights
    # eccentricity matching as a deterministic start
    ex = (DX * pa[None, :]).sum(1)
    ey = (DY * pb[None, :]).sum(1)
    starts = [_northwest(np.argsort(ex, kind="stable"), np.argsort(ey, kind="stable"), a, b)]
    if X.size == Y.size and np.array_equal(DX, DY) and np.array_equal(a, b):
        starts.insert(0, np.diag(a))
    for _ in range(restarts - 1):
        starts.append(_northwest(g.permutation(X.size), g.permutation(Y.size), a, b))
    best = BoxResult(1.0)
    for plan in starts:
        plan = _gw_descent(plan, DX, DY, a, b, gw_iters)
        res = _peel_levels(X, Y, plan, den, n_thresholds)
        if res.value < best.value:
            best = res
    return best


def _gw_descent(plan, DX, DY, a, b, iters):
    """Linearized Gromov-Wasserstein steps; keeps the plan with least distortion."""
    den = a.sum()

    def energy(P):
        Pf = P / den
        return float(((DX ** 2) @ Pf.sum(1) @ Pf.sum(1)) + ((DY ** 2) @ Pf.sum(0) @ Pf.sum(0))
                     - 2 * np.sum((DX @ Pf @ DY) * Pf))

    cur, e_cur = plan, energy(plan)
    for _ in range(iters):
        grad = -2.0 * DX @ (cur / den) @ DY
        nxt = _transport_step(grad, a, b)
        e_nxt = energy(nxt)
        if e_nxt >= e_cur - 1e-12:
            break
        cur, e_cur = nxt, e_nxt
    return cur


def _peel_levels(X, Y, plan, den, n_thresholds):
    ci, cj = np.nonzero(plan)
    mass = plan[ci, cj].astype(np.int64)
    dis = _distortion(X, Y, ci, cj)
    levels = np.unique(dis)
    if len(levels) > n_thresholds:
        levels = np.unique(np.quantile(levels, np.linspace(0, 1, n_thresholds), method="lower"))
    peel = _kernels.get().peel
    best = BoxResult(1.0)
    for t in levels:
        if t >= best.value:
            break
        alive = peel(np.ascontiguousarray((dis > t).astype(np.uint8)), mass)
        kept = int(mass[alive].sum())
        v = max(float(t), (den - kept) / den)
        if v < best.value:
            best = BoxResult(v, None, float(t), kept / den)
    best.coupling = Coupling(plan / den, X, Y)
    return best
