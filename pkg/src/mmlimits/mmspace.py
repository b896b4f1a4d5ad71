"""Finite metric-measure spaces and the maps between them."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

METRIC_TOL = 1e-9
MASS_TOL = 1e-12
# exhaustive triangle check up to this many points, random triples beyond
TRIANGLE_EXACT_MAX = 400
TRIANGLE_SAMPLES = 200_000


class SpaceError(ValueError):
    """An mm-space (or a map between spaces) failed validation."""

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class PseudoMetricViolation(SpaceError):
    """A quotient partition did not come from an isometric action."""


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class FiniteMMSpace:
    """Points with a full distance matrix and probability weights.

    Zero-weight points are dropped at construction so that the space equals
    the support of its measure. ``coords`` optionally keeps an embedding
    (rows aligned with points), used to build coordinate observables.
    """

    dist: np.ndarray
    weights: np.ndarray
    labels: tuple = ()
    coords: np.ndarray | None = None

    def __post_init__(self):
        dist = np.asarray(self.dist, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if dist.ndim != 2 or dist.shape[0] != dist.shape[1] or dist.shape[0] != w.shape[0]:
            raise SpaceError(f"shape mismatch: dist {dist.shape}, weights {w.shape}")
        labels = tuple(self.labels) if len(self.labels) else tuple(range(len(w)))
        if len(labels) != len(w):
            raise SpaceError("labels and weights differ in length")
        coords = self.coords
        keep = w > 0
        if not keep.all() and (w >= 0).all():
            idx = np.nonzero(keep)[0]
            dist = dist[np.ix_(idx, idx)]
            w = w[idx]
            labels = tuple(labels[i] for i in idx)
            if coords is not None:
                coords = np.asarray(coords)[idx]
        object.__setattr__(self, "dist", _frozen(dist))
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "labels", labels)
        if coords is not None:
            coords = np.asarray(coords)
            if coords.shape[0] != len(w):
                raise SpaceError("coords rows must match points")
            object.__setattr__(self, "coords", _frozen(coords, coords.dtype))

    @property
    def size(self) -> int:
        return len(self.weights)

    def __len__(self):
        return self.size

    def digest(self) -> str:
        """Content hash of (dist, weights, coords); used as a cache key."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.dist).tobytes())
        h.update(np.ascontiguousarray(self.weights).tobytes())
        if self.coords is not None:
            h.update(np.ascontiguousarray(self.coords).tobytes())
        return h.hexdigest()[:16]

    @classmethod
    def uniform(cls, dist, labels=(), coords=None) -> "FiniteMMSpace":
        n = np.asarray(dist).shape[0]
        return cls(dist, np.full(n, 1.0 / n), labels, coords)

    @classmethod
    def from_points(cls, points, weights=None, p=2) -> "FiniteMMSpace":
        """Euclidean (``p=2``) or l-infinity (``p=inf``) distances of a point cloud."""
        x = np.asarray(points, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        dist = pairwise(x, p=p)
        if weights is None:
            weights = np.full(len(x), 1.0 / len(x))
        return cls(dist, weights, coords=x)

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict:
        n = self.size
        il = np.tril_indices(n, -1)
        out = {
            "labels": [str(l) for l in self.labels],
            "dist": self.dist[il].tolist(),
            "weights": self.weights.tolist(),
        }
        if self.coords is not None and not np.iscomplexobj(self.coords):
            out["coords"] = self.coords.tolist()
        return out

    @classmethod
    def from_json(cls, obj: dict, validate: bool = True) -> "FiniteMMSpace":
        """Inverse of :meth:`to_json`; invalid spaces raise :class:`SpaceError`."""
        raw_w = np.asarray(obj["weights"], dtype=float)
        dist, w = parse_space_json(obj)
        if validate:
            report = validate_space(dist, w)
            if report:
                raise SpaceError("invalid mm-space: " + "; ".join(report), report)
        keep = np.nonzero(raw_w > 0)[0] if len(w) < len(raw_w) else slice(None)
        labels = obj.get("labels") or ()
        if labels and len(w) < len(raw_w):
            labels = [labels[i] for i in keep]
        coords = obj.get("coords")
        if coords is not None:
            coords = np.asarray(coords)[keep]
        return cls(dist, w, tuple(labels), coords)


def parse_space_json(obj: dict):
    """Distance matrix and weights from the JSON layout.

    ``dist`` is the row-major lower triangle, either strict (n(n-1)/2
    entries) or including the zero diagonal (n(n+1)/2). Zero-weight points
    are dropped.
    """
    w = np.asarray(obj["weights"], dtype=float)
    n = len(w)
    tri = np.asarray(obj["dist"], dtype=float)
    dist = np.zeros((n, n))
    if len(tri) == n * (n - 1) // 2:
        il = np.tril_indices(n, -1)
    elif len(tri) == n * (n + 1) // 2:
        il = np.tril_indices(n, 0)
    else:
        raise SpaceError(f"dist has {len(tri)} entries; expected a lower triangle for n={n}")
    dist[il] = tri
    dist = dist + np.tril(dist, -1).T
    if (w >= 0).all() and not (w > 0).all():
        # zero-weight points are not part of the space
        keep = np.nonzero(w > 0)[0]
        dist, w = dist[np.ix_(keep, keep)], w[keep]
    return dist, w


def pairwise(x, y=None, p=2):
    x = np.asarray(x, dtype=float)
    y = x if y is None else np.asarray(y, dtype=float)
    if p == np.inf:
        out = np.zeros((len(x), len(y)))
        for k in range(x.shape[1]):
            np.maximum(out, np.abs(x[:, k][:, None] - y[:, k][None, :]), out=out)
        return out
    sq = (x * x).sum(1)[:, None] + (y * y).sum(1)[None, :] - 2.0 * x @ y.T
    out = np.sqrt(np.maximum(sq, 0.0))
    if y is x:
        out = 0.5 * (out + out.T)
        np.fill_diagonal(out, 0.0)
    return out


def validate_space(space, weights=None, tol: float = METRIC_TOL, mass_tol: float = MASS_TOL,
                   triangle: str = "auto", seed: int = 0) -> list[str]:
    """List every violated mm-space invariant; an empty list means valid.

    ``space`` may be a :class:`FiniteMMSpace` or a raw distance matrix paired
    with ``weights``. The triangle inequality is checked exhaustively up to
    ``TRIANGLE_EXACT_MAX`` points (or with ``triangle="full"``) and on random
    triples otherwise.
    """
    if isinstance(space, FiniteMMSpace):
        d, w = space.dist, space.weights
    else:
        d, w = np.asarray(space, dtype=float), np.asarray(weights, dtype=float)
    out = []
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        return [f"dist is not square: shape {d.shape}"]
    n = d.shape[0]
    if w.shape != (n,):
        return [f"weights length {w.shape} does not match {n} points"]
    if not np.all(np.isfinite(d)):
        out.append("dist has non-finite entries")
    diag = np.nonzero(np.abs(np.diag(d)) > 0)[0]
    if len(diag):
        out.append(f"nonzero diagonal at {diag[:10].tolist()}")
    asym = np.argwhere(np.abs(d - d.T) > tol)
    if len(asym):
        out.append(f"asymmetric at {asym[:5].tolist()}")
    neg = np.argwhere(d < 0)
    if len(neg):
        out.append(f"negative distance at {neg[:5].tolist()}")
    off = d + np.eye(n)
    zero = np.argwhere(np.triu(off <= 0, 1))
    if len(zero):
        out.append(f"distinct points at zero distance {zero[:5].tolist()}")
    total = float(w.sum())
    if abs(total - 1.0) > mass_tol:
        out.append(f"mass != 1 (sum of weights = {total!r})")
    nonpos = np.nonzero(w <= 0)[0]
    if len(nonpos):
        out.append(f"non-positive weight at {nonpos[:10].tolist()}")
    if n >= 3 and np.all(np.isfinite(d)):
        bad = _triangle_violations(d, tol, triangle, seed)
        if bad:
            out.append(f"triangle inequality fails for (i,j,k) in {bad[:5]}")
    return out


def _triangle_violations(d, tol, mode, seed):
    n = d.shape[0]
    if mode == "full" or (mode == "auto" and n <= TRIANGLE_EXACT_MAX):
        bad = []
        for j in range(n):
            # d[i,k] <= d[i,j] + d[j,k]
            viol = d > d[:, j][:, None] + d[j][None, :] + tol
            if viol.any():
                i, k = np.argwhere(viol)[0]
                bad.append((int(i), j, int(k)))
                if len(bad) >= 5:
                    break
        return bad
    rng = np.random.default_rng(seed)
    t = rng.integers(0, n, size=(TRIANGLE_SAMPLES, 3))
    i, j, k = t.T
    viol = d[i, k] > d[i, j] + d[j, k] + tol
    return [tuple(int(v) for v in row) for row in t[viol][:5]]


def scale_space(t: float, X: FiniteMMSpace) -> FiniteMMSpace:
    if not t > 0:
        raise ValueError(f"scale factor must be positive, got {t}")
    coords = None if X.coords is None else X.coords * t
    return FiniteMMSpace(X.dist * t, X.weights, X.labels, coords)


@dataclass(frozen=True, eq=False)
class PointMap:
    """A map out of a finite space.

    Exactly one of ``target_index`` (into the points of ``target``) or
    ``values`` (rows of coordinates in R^N) is set.
    """

    source: FiniteMMSpace
    target: FiniteMMSpace | None = None
    target_index: np.ndarray | None = None
    values: np.ndarray | None = None
    tag: str = ""

    def __post_init__(self):
        m = self.source.size
        if (self.target_index is None) == (self.values is None):
            raise SpaceError("PointMap needs exactly one of target_index or values")
        if self.target_index is not None:
            idx = np.asarray(self.target_index)
            if idx.shape != (m,):
                raise SpaceError(f"map is partial: {idx.shape[0] if idx.ndim else 0} of {m} points assigned")
            if self.target is None:
                raise SpaceError("index maps need a target space")
            if idx.dtype.kind not in "iu" or idx.min() < 0 or idx.max() >= self.target.size:
                raise SpaceError("target_index out of range of the target space")
            object.__setattr__(self, "target_index", _frozen(idx, np.int64))
        else:
            v = np.asarray(self.values, dtype=float)
            if v.ndim == 1:
                v = v[:, None]
            if v.shape[0] != m or not np.all(np.isfinite(v)):
                raise SpaceError(f"map is partial: values defined on {v.shape[0]} of {m} points")
            object.__setattr__(self, "values", _frozen(v))

    @classmethod
    def identity(cls, X: FiniteMMSpace) -> "PointMap":
        return cls(X, X, np.arange(X.size), tag="identity")

    @classmethod
    def constant(cls, X: FiniteMMSpace, value=0.0) -> "PointMap":
        return cls(X, values=np.full((X.size, 1), float(value)), tag="constant")


def merge_atoms(points, weights):
    """Sum the weights of identical rows; rows come back lexicographically sorted."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    uniq, inv = np.unique(pts, axis=0, return_inverse=True)
    w = np.zeros(len(uniq))
    np.add.at(w, inv.ravel(), np.asarray(weights, dtype=float))
    return uniq, w


def pushforward(f: PointMap, X: FiniteMMSpace | None = None):
    """Push the measure of ``X`` (default ``f.source``) forward along ``f``.

    Index maps give a :class:`FiniteMMSpace` on the image; coordinate maps
    give a :class:`~mmlimits.measurements.MeasureOnRN` with coinciding
    atoms merged.
    """
    from .measurements import MeasureOnRN

    X = f.source if X is None else X
    if X.size != f.source.size:
        raise SpaceError("map is partial on this space")
    if f.target_index is not None:
        w = np.bincount(f.target_index, weights=X.weights, minlength=f.target.size)
        out = FiniteMMSpace(f.target.dist, w, f.target.labels, f.target.coords)
    else:
        pts, w = merge_atoms(f.values, X.weights)
        out = MeasureOnRN(pts, w)
    total = float(out.weights.sum())
    if abs(total - 1.0) > MASS_TOL:
        raise SpaceError(f"pushforward lost mass: total {total!r}")
    return out


@dataclass(frozen=True)
class OrderCertificate:
    is_1lipschitz: bool
    is_measure_preserving: bool
    worst_pair: tuple | None
    worst_excess: float = 0.0

    @property
    def certified(self) -> bool:
        return self.is_1lipschitz and self.is_measure_preserving


def certify_lipschitz_order(f: PointMap, X: FiniteMMSpace, Y: FiniteMMSpace,
                            tol: float = METRIC_TOL) -> OrderCertificate:
    """Check that ``f`` witnesses Y ≺ X: 1-Lipschitz and pushing μ_X to μ_Y."""
    if f.target_index is None:
        raise SpaceError("order certification needs an index map into Y")
    idx = f.target_index
    worst, worst_pair = -np.inf, None
    for start in range(0, X.size, 512):
        rows = slice(start, min(start + 512, X.size))
        excess = Y.dist[np.ix_(idx[rows], idx)] - X.dist[rows]
        k = int(np.argmax(excess))
        i, j = divmod(k, X.size)
        if excess.flat[k] > worst:
            worst, worst_pair = float(excess.flat[k]), (start + i, j)
    pushed = np.bincount(idx, weights=X.weights, minlength=Y.size)
    measure_ok = bool(np.all(np.abs(pushed - Y.weights) <= tol))
    return OrderCertificate(bool(worst <= tol), measure_ok,
                            worst_pair if worst > tol else None, max(worst, 0.0))


def certify_lipschitz_values(values, X: FiniteMMSpace, tol: float = METRIC_TOL):
    """Worst excess of |f(x) - f(x')| (l-inf over columns) over d(x, x')."""
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    worst = -np.inf
    for start in range(0, X.size, 256):
        rows = slice(start, min(start + 256, X.size))
        diff = np.zeros((rows.stop - rows.start, X.size))
        for k in range(v.shape[1]):
            np.maximum(diff, np.abs(v[rows, k][:, None] - v[:, k][None, :]), out=diff)
        worst = max(worst, float((diff - X.dist[rows]).max()))
    return worst <= tol, worst


def quotient_space(X: FiniteMMSpace, orbits: Sequence[Sequence[int]],
                   tol: float = METRIC_TOL) -> FiniteMMSpace:
    """Collapse each orbit to a point: min-over-representatives distance, summed mass."""
    orbits = [np.asarray(o, dtype=np.int64) for o in orbits]
    flat = np.concatenate(orbits) if orbits else np.zeros(0, np.int64)
    if len(flat) != X.size or not np.array_equal(np.sort(flat), np.arange(X.size)):
        raise SpaceError("orbits must partition the point indices")
    k = len(orbits)
    d = np.zeros((k, k))
    for a in range(k):
        block = X.dist[orbits[a]]
        for b in range(a + 1, k):
            d[a, b] = d[b, a] = block[:, orbits[b]].min()
    w = np.array([X.weights[o].sum() for o in orbits])
    labels = tuple(tuple(X.labels[i] for i in o) for o in orbits)
    problems = validate_space(d, w, tol=tol, mass_tol=1e-9)
    if problems:
        raise PseudoMetricViolation("pseudo-metric violation: " + "; ".join(problems), problems)
    return FiniteMMSpace(d, w, labels)


@dataclass(frozen=True, eq=False)
class Coupling:
    """Transport plan between the measures of two finite spaces."""

    plan: np.ndarray
    X: FiniteMMSpace = field(repr=False)
    Y: FiniteMMSpace = field(repr=False)

    def __post_init__(self):
        p = np.asarray(self.plan, dtype=float)
        if p.shape != (self.X.size, self.Y.size) or (p < -MASS_TOL).any():
            raise SpaceError("coupling has wrong shape or negative mass")
        if np.abs(p.sum(1) - self.X.weights).max() > MASS_TOL * max(1, p.shape[1]) or \
                np.abs(p.sum(0) - self.Y.weights).max() > MASS_TOL * max(1, p.shape[0]):
            raise SpaceError("coupling marginals do not match the spaces")
        object.__setattr__(self, "plan", _frozen(p))

    def triplets(self):
        """Sparse ``[i, j, mass]`` list for JSON output."""
        i, j = np.nonzero(self.plan)
        return [[int(a), int(b), float(self.plan[a, b])] for a, b in zip(i, j)]


def load_space(path) -> FiniteMMSpace:
    with open(path) as fh:
        return FiniteMMSpace.from_json(json.load(fh))
