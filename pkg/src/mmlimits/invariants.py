"""Partial and observable diameter, separation distance."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._util import integer_masses, mass_threshold, rng
from .mmspace import FiniteMMSpace, certify_lipschitz_values

MASS_TOL = 1e-12
LIP_TOL = 1e-9
# exhaustive separation solver handles up to this many points
SEP_EXACT_MAX = 18
# pairwise Lipschitz certification of family members up to this many points
CERTIFY_EXACT_MAX = 800
CERTIFY_SAMPLED_PAIRS = 200_000


@dataclass(frozen=True, eq=False)
class ScalarPushforward:
    """A probability measure on the line: sorted atoms with weights."""

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if v.shape != w.shape or v.ndim != 1:
            raise ValueError("values and weights must be 1-D of equal length")
        if len(v) > 1 and np.any(np.diff(v) < 0):
            order = np.argsort(v, kind="stable")
            v, w = v[order], w[order]
        if abs(w.sum() - 1.0) > MASS_TOL:
            raise ValueError(f"pushforward mass {w.sum()!r} != 1")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "weights", w)

    @classmethod
    def of(cls, f, weights) -> "ScalarPushforward":
        """Push ``weights`` forward along the function values ``f``."""
        f = np.asarray(f, dtype=float)
        order = np.argsort(f, kind="stable")
        return cls(f[order], np.asarray(weights, dtype=float)[order])


def partial_diameter(p: ScalarPushforward, alpha: float, tol: float = MASS_TOL) -> float:
    return partial_diameter_window(p, alpha, tol)[0]


def partial_diameter_window(p: ScalarPushforward, alpha: float, tol: float = MASS_TOL):
    """Minimal length of a window ``[values[i], values[j]]`` holding mass ≥ alpha.

    Returns ``(length, i, j)``; ties go to the smallest ``i``. ``alpha`` at or
    below 0 gives 0, and so does ``alpha > 1`` since no set qualifies.
    """
    if alpha <= tol or alpha > 1.0 + tol or len(p.values) == 0:
        return 0.0, -1, -1
    cum = np.concatenate([[0.0], np.cumsum(p.weights)])
    best, i, j = _kernels.get().partial_diameter_sorted(
        np.ascontiguousarray(p.values), cum, alpha - tol)
    return float(best), int(i), int(j)


def _sorted_partial_diameter(f, weights, alpha, tol=MASS_TOL):
    order = np.argsort(f, kind="stable")
    cum = np.empty(len(f) + 1)
    cum[0] = 0.0
    np.cumsum(weights[order], out=cum[1:])
    return _kernels.get().partial_diameter_sorted(
        np.ascontiguousarray(f[order]), cum, alpha - tol)[0]


class CandidateFamily:
    """A finite list of scalar 1-Lipschitz functions on one space.

    Members are stored in blocks. A ``rows`` block refers to distance
    functions ``d(., x_i)`` and is read from the space at evaluation time, so
    it follows any rescaling of the space. A ``values`` block holds explicit
    function values (one row per member). Every block carries a provenance
    tag: distance-to-point, distance-to-set, linear-projection,
    random-direction or solver-induced.
    """

    TAGS = ("distance-to-point", "distance-to-set", "linear-projection",
            "random-direction", "solver-induced")

    def __init__(self, blocks=()):
        self.blocks = []
        for tag, kind, payload in blocks:
            self.add(tag, kind, payload)

    def add(self, tag, kind, payload):
        if tag not in self.TAGS:
            raise ValueError(f"unknown provenance tag {tag!r}")
        if kind == "rows":
            payload = np.asarray(payload, dtype=np.int64)
        elif kind == "values":
            payload = np.atleast_2d(np.asarray(payload, dtype=float))
        else:
            raise ValueError(f"unknown block kind {kind!r}")
        if len(payload):
            self.blocks.append((tag, kind, payload))
        return self

    def __len__(self):
        return sum(len(p) for _, _, p in self.blocks)

    def union(self, other: "CandidateFamily") -> "CandidateFamily":
        return CandidateFamily(self.blocks + other.blocks)

    def scaled(self, t: float) -> "CandidateFamily":
        """Family for ``scale_space(t, X)``: explicit values times ``t``."""
        return CandidateFamily([(tag, kind, p if kind == "rows" else p * t)
                                for tag, kind, p in self.blocks])

    def pulled_back(self, target_index) -> "CandidateFamily":
        """Compose every explicit member with an index map ``x -> f[target_index[x]]``.

        Distance rows are not index-stable under maps, so only ``values``
        blocks are accepted.
        """
        idx = np.asarray(target_index)
        out = []
        for tag, kind, p in self.blocks:
            if kind != "values":
                raise ValueError("materialize distance rows before pulling back")
            out.append((tag, kind, p[:, idx]))
        return CandidateFamily(out)

    def materialized(self, X: FiniteMMSpace) -> "CandidateFamily":
        return CandidateFamily([(tag, "values", X.dist[p] if kind == "rows" else p)
                                for tag, kind, p in self.blocks])

    def iter_members(self, X: FiniteMMSpace):
        """Yield ``(tag, position, values)`` for every member, in order."""
        pos = 0
        for tag, kind, p in self.blocks:
            for k in range(len(p)):
                f = X.dist[p[k]] if kind == "rows" else p[k]
                if len(f) != X.size:
                    raise ValueError("family member length does not match the space")
                yield tag, pos, f
                pos += 1

    def member(self, X: FiniteMMSpace, position: int):
        for _, pos, f in self.iter_members(X):
            if pos == position:
                return f
        raise IndexError(position)

    def certify(self, X: FiniteMMSpace, tol: float = LIP_TOL, seed: int = 0):
        """Largest Lipschitz excess over the explicit members.

        Distance rows are 1-Lipschitz by the triangle inequality of ``X``.
        Explicit members are checked on all pairs for small spaces and on
        ``CERTIFY_SAMPLED_PAIRS`` random pairs otherwise.
        """
        worst = 0.0
        explicit = [p for _, kind, p in self.blocks if kind == "values"]
        if not explicit:
            return True, worst
        vals = np.concatenate(explicit, axis=0)
        if X.size <= CERTIFY_EXACT_MAX:
            _, worst = certify_lipschitz_values(vals.T, X, tol)
        else:
            g = rng(seed, 0xCE27)
            i = g.integers(0, X.size, CERTIFY_SAMPLED_PAIRS)
            j = g.integers(0, X.size, CERTIFY_SAMPLED_PAIRS)
            d = X.dist[i, j]
            for start in range(0, len(vals), 64):
                block = vals[start:start + 64]
                worst = max(worst, float((np.abs(block[:, i] - block[:, j]) - d).max()))
        return worst <= tol, max(worst, 0.0)


def coordinate_functions(coords) -> np.ndarray:
    """Rows of real coordinates; complex coordinates give the moduli |z_j|."""
    c = np.asarray(coords)
    if np.iscomplexobj(c):
        return np.abs(c).T.copy()
    return np.asarray(c, dtype=float).T.copy()


def random_direction_functions(coords, q: int, seed: int) -> np.ndarray:
    """``q`` random unit-direction projections.

    Real coordinates give ``<u, x>``; complex ones give ``|<u, z>|``, which is
    constant on circle orbits and so descends to the quotient.
    """
    c = np.asarray(coords)
    dim = c.shape[1]
    g = rng(seed, 0xD1)
    if np.iscomplexobj(c):
        u = g.standard_normal((q, dim)) + 1j * g.standard_normal((q, dim))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        return np.abs(c @ u.conj().T).T.copy()
    u = g.standard_normal((q, dim))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return (c @ u.T).T.copy()


def default_family(X: FiniteMMSpace, directions: int = 64, seed: int = 0,
                   witness_sets=(), distance_rows=True, coordinates=True) -> CandidateFamily:
    """Distance-to-point functions, coordinate and random-direction projections
    (when coordinates are attached) and distances to the given witness sets."""
    fam = CandidateFamily()
    if distance_rows:
        fam.add("distance-to-point", "rows", np.arange(X.size))
    if X.coords is not None:
        if coordinates:
            fam.add("linear-projection", "values", coordinate_functions(X.coords))
        if directions > 0:
            fam.add("random-direction", "values",
                    random_direction_functions(X.coords, directions, seed))
    for A in witness_sets:
        fam.add("distance-to-set", "values", distance_to_set(X, A)[None, :])
    return fam


def distance_to_set(X: FiniteMMSpace, A) -> np.ndarray:
    A = np.asarray(A, dtype=np.int64)
    if len(A) == 0:
        raise ValueError("distance to an empty set")
    return X.dist[A].min(axis=0)


@dataclass
class ObsDiamResult:
    value: float
    witness_tag: str
    witness_position: int
    witness: np.ndarray | None = field(default=None, repr=False)

    def to_json(self):
        return {"value": self.value, "witness_tag": self.witness_tag,
                "witness_position": self.witness_position}


def obs_diameter(X: FiniteMMSpace, kappa: float, family: CandidateFamily | None = None,
                 keep_witness: bool = True) -> ObsDiamResult:
    """Lower bound for the observable diameter: max partial diameter over ``family``.

    Each member contributes ``partial_diameter(f_* mu, 1 - kappa)``; the
    maximizing member (first one on ties) is the witness.
    """
    if not 0 < kappa < 1:
        raise ValueError(f"kappa must lie in (0, 1), got {kappa}")
    if family is None:
        family = default_family(X)
    if len(family) == 0:
        raise ValueError("empty candidate family")
    alpha = 1.0 - kappa
    w = X.weights
    best, best_tag, best_pos = -1.0, "", -1
    for tag, pos, f in family.iter_members(X):
        v = _sorted_partial_diameter(f, w, alpha)
        if v > best:
            best, best_tag, best_pos = v, tag, pos
    witness = family.member(X, best_pos).copy() if keep_witness else None
    return ObsDiamResult(float(best), best_tag, best_pos, witness)


@dataclass
class SeparationResult:
    value: float
    sets: list
    exact: bool
    lower_bound: bool

    def to_json(self):
        return {"value": self.value, "sets": [list(map(int, s)) for s in self.sets],
                "exact": self.exact, "lower_bound": self.lower_bound}


def separation(X: FiniteMMSpace, kappas, method: str = "auto", family=None,
               seed: int = 0, max_candidates: int = 256) -> SeparationResult:
    """Separation distance for mass levels ``kappas`` (N+1 of them, N ≥ 1).

    ``method="exact"`` (two sets, at most ``SEP_EXACT_MAX`` points) enumerates
    every first set A0 of enough mass and pairs it with the farthest points.
    ``method="heuristic"`` slices candidate functions into quantile bands and
    reports the true set distance of the best slicing: a lower bound.
    ``"auto"`` picks exact when it applies.
    """
    kappas = [float(k) for k in kappas]
    if len(kappas) < 2 or min(kappas) <= 0:
        raise ValueError("need at least two positive mass levels")
    if method == "auto":
        method = "exact" if len(kappas) == 2 and X.size <= SEP_EXACT_MAX else "heuristic"
    if method == "exact":
        return _separation_exact(X, kappas)
    return _separation_heuristic(X, kappas, family, seed, max_candidates)


def _separation_exact(X, kappas):
    if len(kappas) != 2:
        raise ValueError("exact separation handles two sets only")
    if X.size > SEP_EXACT_MAX:
        raise ValueError(f"exact separation limited to {SEP_EXACT_MAX} points")
    if sum(kappas) > 1.0 + MASS_TOL:
        return SeparationResult(0.0, [], True, False)
    (w,), den = integer_masses(X.weights)
    t0, t1 = mass_threshold(kappas[0], den), mass_threshold(kappas[1], den)
    best, mask = _kernels.get().sep2_exhaustive(np.ascontiguousarray(X.dist), w, t0, t1)
    if mask < 0:
        return SeparationResult(0.0, [], True, False)
    A0 = np.array([i for i in range(X.size) if (mask >> i) & 1], dtype=np.int64)
    A1 = _farthest_set(X, A0, w, t1)
    return SeparationResult(float(best), [A0.tolist(), A1.tolist()], True, False)


def _farthest_set(X, A0, w_int, t1):
    d = X.dist[A0].min(axis=0)
    order = np.argsort(-d, kind="stable")
    acc = np.cumsum(w_int[order])
    k = int(np.searchsorted(acc, t1, side="left"))
    return np.sort(order[:k + 1])


def _slice_sets(order, w_int, thresholds, den):
    """Quantile bands of a sorted order with the given integer masses.

    Bands are laid out left to right with the leftover mass split evenly
    between consecutive bands; ``None`` if they do not fit.
    """
    total = int(sum(thresholds))
    if total > den:
        return None
    gap = (den - total) // max(len(thresholds) - 1, 1)
    cum = np.cumsum(w_int[order])
    sets, start_mass = [], 0
    for t in thresholds:
        lo = int(np.searchsorted(cum, start_mass, side="right"))
        hi = int(np.searchsorted(cum, cum[lo - 1] + t if lo > 0 else t, side="left"))
        if hi >= len(order):
            return None
        sets.append(order[lo:hi + 1])
        start_mass = int(cum[hi]) + gap
    return sets


def _min_pairwise_set_distance(X, sets):
    best = np.inf
    for a in range(len(sets)):
        da = X.dist[sets[a]].min(axis=0)
        for b in range(a + 1, len(sets)):
            best = min(best, float(da[sets[b]].min()))
    return best


def _separation_heuristic(X, kappas, family, seed, max_candidates):
    if sum(kappas) > 1.0 + MASS_TOL:
        return SeparationResult(0.0, [], False, True)
    (w,), den = integer_masses(X.weights)
    th = [mass_threshold(k, den) for k in kappas]
    if family is None:
        family = default_family(X, directions=16, seed=seed)
    members = list(family.iter_members(X))
    if len(members) > max_candidates:
        pick = np.sort(rng(seed, 0x5E9).choice(len(members), max_candidates, replace=False))
        members = [members[i] for i in pick]
    best, best_sets = 0.0, []
    two = len(kappas) == 2
    for _, _, f in members:
        order = np.argsort(f, kind="stable")
        for direction in (order, order[::-1]):
            if two:
                # bottom slice as A0, then the farthest points from it
                cum = np.cumsum(w[direction])
                k = int(np.searchsorted(cum, th[0], side="left"))
                if k >= len(direction):
                    continue
                A0 = np.sort(direction[:k + 1])
                A1 = _farthest_set(X, A0, w, th[1])
                v = float(X.dist[A0].min(axis=0)[A1].min())
                sets = [A0, A1]
            else:
                sets = _slice_sets(direction, w, th, den)
                if sets is None:
                    continue
                sets = [np.sort(s) for s in sets]
                v = _min_pairwise_set_distance(X, sets)
            if v > best:
                best, best_sets = v, [s.tolist() for s in sets]
    return SeparationResult(best, best_sets, False, True)


def line_separation(values, weights, kappas, tol: float = MASS_TOL) -> float:
    """Two-block separation of a measure on the line.

    The best distance between a bottom quantile block and a top quantile
    block, in either mass order. This is a lower bound for the separation of
    the measure: optimal sets need not be blocks (one set may sit between
    two pieces of the other).
    """
    if len(kappas) != 2:
        raise ValueError("line separation handles two sets only")
    if sum(kappas) > 1.0 + tol:
        return 0.0
    order = np.argsort(values, kind="stable")
    v = np.asarray(values, dtype=float)[order]
    cum = np.cumsum(np.asarray(weights, dtype=float)[order])
    total = cum[-1]
    best = 0.0
    for lo_k, hi_k in (kappas, kappas[::-1]):
        i = min(int(np.searchsorted(cum, lo_k - tol, side="left")), len(v) - 1)
        # largest j with mass of v[j:] >= hi_k
        tail = total - np.concatenate([[0.0], cum[:-1]])
        j = int(np.nonzero(tail >= hi_k - tol)[0][-1])
        best = max(best, float(v[j] - v[i]))
    return best


def pushforward_separation(X: FiniteMMSpace, kappas, family: CandidateFamily | None = None):
    """Largest two-block separation of ``f_* mu`` over the family.

    Each pushforward is dominated by ``X`` and the block value is a lower
    bound for its separation, so this is a lower bound for the separation of
    ``X`` that depends on the law of the observables only.
    Returns ``(value, witness position)``.
    """
    if family is None:
        family = default_family(X)
    best, pos = 0.0, -1
    for _, k, f in family.iter_members(X):
        v = line_separation(f, X.weights, kappas)
        if v > best:
            best, pos = v, k
    return best, pos
