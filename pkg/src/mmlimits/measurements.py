"""Finite measurement sets, the clamp projection and the pyramid metric estimate."""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from ._util import rng
from .distances import hausdorff_measures
from .mmspace import FiniteMMSpace, PointMap, SpaceError, certify_lipschitz_order, merge_atoms

LIP_TOL = 1e-9
CERTIFY_EXACT_MAX = 1500
CERTIFY_SAMPLED_PAIRS = 200_000
PROBE_DIM = 4


@dataclass(frozen=True, eq=False)
class MeasureOnRN:
    """Weighted atoms in R^N, compared with the l-infinity metric."""

    points: np.ndarray
    weights: np.ndarray
    R: float | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.asarray(self.weights, dtype=float)
        if pts.shape[0] != len(w):
            raise ValueError("points and weights differ in length")
        if abs(w.sum() - 1.0) > 1e-12 or (w < 0).any():
            raise ValueError(f"measure mass {w.sum()!r} != 1")
        if self.R is not None and len(pts) and np.abs(pts).max() > self.R:
            raise ValueError("support leaves the box [-R, R]^N")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def N(self) -> int:
        return self.points.shape[1]

    def to_json(self):
        return {"points": self.points.tolist(), "weights": self.weights.tolist(), "R": self.R}

    @classmethod
    def from_json(cls, obj):
        return cls(np.asarray(obj["points"], dtype=float).reshape(len(obj["weights"]), -1),
                   obj["weights"], obj.get("R"))


def clamp_projection(R: float, q):
    """Nearest point of the box [-R, R]^N in l-infinity: a coordinatewise clamp."""
    if R < 0:
        raise ValueError("R must be nonnegative")
    return np.clip(np.asarray(q, dtype=float), -R, R)


@dataclass
class MeasurementSet:
    N: int
    R: float | None
    budget: int
    seed: int
    members: list = field(default_factory=list)
    tags: list = field(default_factory=list)
    lipschitz_excess: list = field(default_factory=list)

    def __len__(self):
        return len(self.members)

    def prefix(self, budget: int) -> "MeasurementSet":
        keep = [k for k, t in enumerate(self.tags) if t["index"] < budget]
        return MeasurementSet(self.N, self.R, budget, self.seed,
                              [self.members[k] for k in keep], [self.tags[k] for k in keep],
                              [self.lipschitz_excess[k] for k in keep])

    def to_json(self):
        return {"N": self.N, "R": self.R, "budget": self.budget, "seed": self.seed,
                "members": [m.to_json() for m in self.members], "tags": self.tags,
                "lipschitz_excess": self.lipschitz_excess}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["N"], obj["R"], obj["budget"], obj["seed"],
                   [MeasureOnRN.from_json(m) for m in obj["members"]], obj["tags"],
                   obj["lipschitz_excess"])


@dataclass(eq=False)
class PyramidApprox:
    """A space, or an increasing chain of spaces standing for a virtual pyramid.

    For a chain, consecutive members are linked by maps certified to be
    1-Lipschitz and measure-preserving (``links`` holds the index maps from
    member k+1 onto member k).
    """

    spaces: list
    links: list = field(default_factory=list)
    label: str = ""

    def __post_init__(self):
        if isinstance(self.spaces, FiniteMMSpace):
            self.spaces = [self.spaces]
        for k, idx in enumerate(self.links):
            f = PointMap(self.spaces[k + 1], self.spaces[k], np.asarray(idx))
            cert = certify_lipschitz_order(f, self.spaces[k + 1], self.spaces[k])
            if not cert.certified:
                raise SpaceError(f"chain link {k + 1} -> {k} is not a domination map")

    @classmethod
    def of(cls, X: FiniteMMSpace, label: str = "") -> "PyramidApprox":
        return cls([X], [], label)

    def digest(self) -> str:
        return "+".join(X.digest() for X in self.spaces)


# -- map recipes -------------------------------------------------------------
#
# A recipe is a scalar 1-Lipschitz function described by plain data, so the
# same recipe can be evaluated on any space of the matching kind. ``support``
# is the number of leading coordinates it reads.

def _draw_atom(g, kind, probe):
    if kind == "real":
        u = g.random()
        if u < 0.45:
            j = int(g.integers(probe))
            return {"op": "coord", "j": j, "s": float(g.choice([-1, 1]) * g.uniform(0.5, 1.0)),
                    "support": j + 1}
        if u < 0.7:
            j = int(g.integers(probe))
            return {"op": "absdev", "j": j, "c": float(g.standard_normal()), "support": j + 1}
        d = int(g.integers(1, probe + 1))
        return {"op": "anchor", "anchor": g.standard_normal(d).tolist(), "support": d}
    if kind == "complex":
        u = g.random()
        if u < 0.4:
            j = int(g.integers(probe))
            return {"op": "modulus", "j": j, "s": float(g.uniform(0.5, 1.0)), "support": j + 1}
        d = int(g.integers(1, probe + 1))
        v = (g.standard_normal(d) + 1j * g.standard_normal(d)) / math.sqrt(2)
        if u < 0.7:
            v = v / np.linalg.norm(v)
            return {"op": "hermitian", "re": v.real.tolist(), "im": v.imag.tolist(), "support": d}
        return {"op": "orbit_anchor", "re": v.real.tolist(), "im": v.imag.tolist(), "support": d}
    # metric only: distance to a point picked by quantile position
    return {"op": "point", "u": float(g.random()), "s": float(g.uniform(0.5, 1.0)), "support": 0}


def draw_recipe(g, kind, probe):
    if g.random() < 0.2:
        a = _draw_atom(g, kind, probe)
        b = _draw_atom(g, kind, probe)
        return {"op": "max" if g.random() < 0.5 else "min", "args": [a, b],
                "support": max(a["support"], b["support"])}
    return _draw_atom(g, kind, probe)


def space_kind(X: FiniteMMSpace) -> str:
    if X.coords is None:
        return "metric"
    return "complex" if np.iscomplexobj(X.coords) else "real"


def evaluate_recipe(r, X: FiniteMMSpace) -> np.ndarray:
    op = r["op"]
    if op in ("max", "min"):
        a, b = (evaluate_recipe(s, X) for s in r["args"])
        return np.maximum(a, b) if op == "max" else np.minimum(a, b)
    c = X.coords
    if op == "coord":
        return r["s"] * c[:, r["j"]]
    if op == "absdev":
        return np.abs(c[:, r["j"]] - r["c"])
    if op == "anchor":
        a = np.asarray(r["anchor"])
        return np.linalg.norm(c[:, :len(a)] - a, axis=1)
    if op == "modulus":
        return r["s"] * np.abs(c[:, r["j"]])
    v = np.asarray(r["re"]) + 1j * np.asarray(r["im"]) if op in ("hermitian", "orbit_anchor") else None
    if op == "hermitian":
        return np.abs(c[:, :len(v)] @ v.conj())
    if op == "orbit_anchor":
        z = c[:, :len(v)]
        sq = (np.abs(z) ** 2).sum(1) + float(np.vdot(v, v).real) - 2 * np.abs(z @ v.conj())
        return np.sqrt(np.maximum(sq, 0.0))
    if op == "point":
        idx = min(int(r["u"] * X.size), X.size - 1)
        return r["s"] * X.dist[idx]
    raise ValueError(f"unknown recipe op {op!r}")


def weighted_median(v, w):
    order = np.argsort(v, kind="stable")
    cum = np.cumsum(w[order])
    return float(v[order][np.searchsorted(cum, 0.5 * cum[-1], side="left")])


def _certify_map(values, X, seed):
    """Worst excess of the l-infinity Lipschitz quotient over 1."""
    m = X.size
    if m <= CERTIFY_EXACT_MAX:
        worst = -np.inf
        for start in range(0, m, 256):
            rows = slice(start, min(start + 256, m))
            diff = np.zeros((rows.stop - rows.start, m))
            for k in range(values.shape[1]):
                np.maximum(diff, np.abs(values[rows, k][:, None] - values[:, k][None, :]), out=diff)
            worst = max(worst, float((diff - X.dist[rows]).max()))
        return worst
    g = rng(seed, 0xCE)
    i = g.integers(0, m, CERTIFY_SAMPLED_PAIRS)
    j = g.integers(0, m, CERTIFY_SAMPLED_PAIRS)
    diff = np.abs(values[i] - values[j]).max(axis=1)
    return float((diff - X.dist[i, j]).max())


def member_recipes(seed: int, index: int, N: int, kind: str, probe: int):
    """The recipes of member ``index``: a pure function of (seed, index)."""
    g = rng(seed, 0x3EA5, index)
    return [draw_recipe(g, kind, probe) for _ in range(N)]


def _member_measure(X, recipes, R, seed, index):
    vals = np.column_stack([evaluate_recipe(r, X) for r in recipes])
    vals = vals - np.array([weighted_median(vals[:, k], X.weights) for k in range(vals.shape[1])])
    excess = _certify_map(vals, X, seed + index)
    if excess > LIP_TOL:
        raise SpaceError(f"measurement map {index} is not 1-Lipschitz (excess {excess:.3g})")
    if R is not None:
        vals = clamp_projection(R, vals)
    pts, w = merge_atoms(vals, X.weights)
    return MeasureOnRN(pts, w, R), max(excess, 0.0)


def _cache_path(key: dict):
    root = os.environ.get("MMLIMITS_CACHE_DIR")
    if not root:
        return None
    h = hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()[:32]
    return os.path.join(root, f"mset-{h}.json")


def measurement_set(X, N: int, R: float | None = None, budget: int = 8, seed: int = 0,
                    probe_dim: int = PROBE_DIM, use_cache: bool = True,
                    maps=None) -> MeasurementSet:
    """``budget`` random 1-Lipschitz maps into (R^N, l-inf), pushed forward and clamped.

    Member ``j`` depends only on ``(seed, j)``, so a smaller budget yields a
    prefix of a larger one. Each coordinate is centred at its weighted median
    before clamping. For a :class:`PyramidApprox` chain the result is the
    union over the chain; a member whose recipes read more coordinates than a
    space carries is skipped for that space.

    ``maps`` replaces the random recipes by explicit value arrays (shape
    ``(m,)`` or ``(m, N)`` on a single space), used as given: certified,
    clamped, not centred.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if N < 1:
        raise ValueError("N must be at least 1")
    if maps is not None:
        return _explicit_set(X, N, R, seed, maps)
    P = X if isinstance(X, PyramidApprox) else PyramidApprox.of(X)
    key = {"source": P.digest(), "N": N, "R": R, "budget": budget, "seed": seed,
           "probe": probe_dim, "version": __version__}
    path = _cache_path(key) if use_cache else None
    if path and os.path.exists(path):
        with open(path) as fh:
            return MeasurementSet.from_json(json.load(fh))
    out = MeasurementSet(N, R, budget, seed)
    for level, S in enumerate(P.spaces):
        kind = space_kind(S)
        dim = S.coords.shape[1] if S.coords is not None else 0
        for j in range(budget):
            recipes = member_recipes(seed, j, N, kind, probe_dim)
            if kind != "metric" and max(r["support"] for r in recipes) > dim:
                continue
            meas, excess = _member_measure(S, recipes, R, seed, j)
            out.members.append(meas)
            out.tags.append({"index": j, "level": level, "ops": [r["op"] for r in recipes]})
            out.lipschitz_excess.append(excess)
    if path:
        os.makedirs(os.path.dirname(path), exist_ok=True)
        tmp = path + ".tmp"
        with open(tmp, "w") as fh:
            json.dump(out.to_json(), fh)
        os.replace(tmp, path)
    return out


def _explicit_set(X, N, R, seed, maps):
    if not isinstance(X, FiniteMMSpace):
        raise ValueError("explicit maps need a single space")
    out = MeasurementSet(N, R, len(maps), seed)
    for j, f in enumerate(maps):
        vals = np.asarray(f, dtype=float).reshape(X.size, -1)
        if vals.shape[1] != N:
            raise ValueError(f"map {j} has {vals.shape[1]} coordinates, expected {N}")
        excess = _certify_map(vals, X, seed + j)
        if excess > LIP_TOL:
            raise SpaceError(f"measurement map {j} is not 1-Lipschitz (excess {excess:.3g})")
        if R is not None:
            vals = clamp_projection(R, vals)
        pts, w = merge_atoms(vals, X.weights)
        out.members.append(MeasureOnRN(pts, w, R))
        out.tags.append({"index": j, "level": 0, "ops": ["explicit"] * N})
        out.lipschitz_excess.append(max(excess, 0.0))
    return out


@dataclass
class RhoResult:
    value: float
    tail_bound: float
    per_k: list

    def to_json(self):
        return {"value": self.value, "tail_bound": self.tail_bound, "per_k": self.per_k}


def rho_tail(K: int) -> float:
    """Sum over k > K of 2^-k / (4k)."""
    head = sum(2.0 ** -k / k for k in range(1, K + 1))
    return max(math.log(2.0) - head, 0.0) / 4.0


def pyramid_rho(PX, PY, K: int = 6, budget: int = 8, seed: int = 0) -> RhoResult:
    """Truncated estimate of the pyramid metric between two pyramid approximations.

    For each k ≤ K the Hausdorff distance h_k of the k-dimensional
    measurement sets clamped to [-k, k]^k is doubled to bound the
    corresponding term, capped at 1 (each term is at most 1/(4k)), and
    weighted by 2^-k / (4k).
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    PX = PX if isinstance(PX, PyramidApprox) else PyramidApprox.of(PX)
    PY = PY if isinstance(PY, PyramidApprox) else PyramidApprox.of(PY)
    value, per_k = 0.0, []
    for k in range(1, K + 1):
        if PX is PY:
            h = 0.0
        else:
            MX = measurement_set(PX, k, float(k), budget, seed)
            MY = measurement_set(PY, k, float(k), budget, seed)
            if not MX.members or not MY.members:
                raise ValueError(f"no evaluable measurement at k={k}")
            h = hausdorff_measures(MX.members, MY.members)
        per_k.append({"k": k, "hausdorff": h})
        value += 2.0 ** -k / (4 * k) * min(2.0 * h, 1.0)
    return RhoResult(value, rho_tail(K), per_k)
