"""Samplers and closed forms for spheres, Gaussian spaces and complex projective spaces."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special
from scipy.optimize import brentq

from ._util import rng
from .mmspace import FiniteMMSpace, PointMap, SpaceError, certify_lipschitz_order

SPHERE_METRICS = ("geodesic", "chordal")
CPN_METRICS = ("fubini_study", "chordal_quotient")


@dataclass(frozen=True)
class SphereSpec:
    n: int
    r: float = 1.0
    metric_kind: str = "geodesic"
    m: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.r <= 0 or self.m < 2 or self.n < 1 or self.metric_kind not in SPHERE_METRICS:
            raise ValueError(f"invalid sphere spec {self}")

    def to_json(self):
        return asdict(self)


@dataclass(frozen=True)
class GaussianSpec:
    n: int
    lam: float = 1.0
    m: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.lam <= 0 or self.m < 2 or self.n < 1:
            raise ValueError(f"invalid Gaussian spec {self}")

    def to_json(self):
        return asdict(self)


@dataclass(frozen=True)
class ProjectiveSpec:
    n: int
    r: float = 1.0
    metric_kind: str = "fubini_study"
    m: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.r <= 0 or self.m < 2 or self.n < 1 or self.metric_kind not in CPN_METRICS:
            raise ValueError(f"invalid projective spec {self}")

    def to_json(self):
        return asdict(self)


def sphere_points(n: int, r: float, m: int, seed: int) -> np.ndarray:
    """``m`` uniform points of the n-sphere of radius ``r`` in R^{n+1}."""
    x = rng(seed, 0x5F, n).standard_normal((m, n + 1))
    return r * x / np.linalg.norm(x, axis=1, keepdims=True)


def gram_distances(x, r, metric_kind):
    G = x @ x.conj().T if np.iscomplexobj(x) else x @ x.T
    if metric_kind in ("geodesic", "chordal"):
        G = 0.5 * (G + G.T)
        if metric_kind == "geodesic":
            D = r * np.arccos(np.clip(G / (r * r), -1.0, 1.0))
        else:
            D = np.sqrt(np.maximum(2 * r * r - 2 * G, 0.0))
    else:
        A = np.abs(G)
        A = 0.5 * (A + A.T)
        if metric_kind == "fubini_study":
            D = r * np.arccos(np.clip(A / (r * r), 0.0, 1.0))
        else:
            D = np.sqrt(np.maximum(2 * r * r - 2 * A, 0.0))
    np.fill_diagonal(D, 0.0)
    return D


def sample_sphere(spec: SphereSpec) -> FiniteMMSpace:
    x = sphere_points(spec.n, spec.r, spec.m, spec.seed)
    D = gram_distances(x, spec.r, spec.metric_kind)
    return FiniteMMSpace(D, np.full(spec.m, 1.0 / spec.m), coords=x)


def gaussian_points(n: int, lam: float, m: int, seed: int) -> np.ndarray:
    return lam * rng(seed, 0x6A, n).standard_normal((m, n))


def sample_gaussian(spec: GaussianSpec) -> FiniteMMSpace:
    x = gaussian_points(spec.n, spec.lam, spec.m, spec.seed)
    return FiniteMMSpace.from_points(x)


def cpn_points(n: int, r: float, m: int, seed: int) -> np.ndarray:
    """Representatives in C^{n+1} of ``m`` uniform points of CP^n(r)."""
    x = sphere_points(2 * n + 1, r, m, seed)
    return x[:, 0::2] + 1j * x[:, 1::2]


def sample_cpn(spec: ProjectiveSpec) -> FiniteMMSpace:
    """Hopf quotient of a sphere sample, distances minimized over the circle in closed form."""
    z = cpn_points(spec.n, spec.r, spec.m, spec.seed)
    D = gram_distances(z, spec.r, spec.metric_kind)
    return FiniteMMSpace(D, np.full(spec.m, 1.0 / spec.m), coords=z)


def quotient_pair_distance(z, w, r=None, metric_kind="chordal_quotient"):
    """Distance between the circle orbits of ``z`` and ``w``."""
    ip = abs(np.vdot(w, z))
    if metric_kind == "fubini_study":
        return r * math.acos(min(ip / (r * r), 1.0))
    return math.sqrt(max(float(np.vdot(z, z).real + np.vdot(w, w).real) - 2 * ip, 0.0))


def orbit_space_distances(u) -> np.ndarray:
    """C^k / S^1 distances sqrt(|u|^2 + |v|^2 - 2|<u, v>|) between rows of ``u``."""
    sq = (np.abs(u) ** 2).sum(1)
    A = np.abs(u @ u.conj().T)
    A = 0.5 * (A + A.T)
    D = np.sqrt(np.maximum(sq[:, None] + sq[None, :] - 2 * A, 0.0))
    np.fill_diagonal(D, 0.0)
    return D


@dataclass
class Projection:
    """A coordinate projection of a sample with its order certificate."""

    values: np.ndarray
    target: FiniteMMSpace
    map: PointMap
    certificate: object


def projection_map(X: FiniteMMSpace, k: int, kind: str = "coordinate",
                   tol: float = 1e-9) -> Projection:
    """Project a sample onto its first ``k`` coordinates (real or complex).

    ``coordinate`` keeps the Euclidean metric of R^k; ``hopf_coordinate``
    keeps the first ``k`` complex coordinates and the orbit metric of
    C^k / S^1. The image sample is built as a space and the map onto it is
    certified 1-Lipschitz and measure-preserving here.
    """
    if X.coords is None:
        raise ValueError("projection needs embedded coordinates")
    c = X.coords
    if not 1 <= k <= c.shape[1]:
        raise ValueError(f"k={k} out of range 1..{c.shape[1]}")
    if kind == "coordinate":
        if np.iscomplexobj(c):
            raise ValueError("use hopf_coordinate for complex samples")
        v = c[:, :k]
        uniq, inv = np.unique(v, axis=0, return_inverse=True)
        w = np.bincount(inv.ravel(), weights=X.weights, minlength=len(uniq))
        Y = FiniteMMSpace.from_points(uniq, w)
    elif kind == "hopf_coordinate":
        v = c[:, :k] if np.iscomplexobj(c) else c[:, 0:2 * k:2] + 1j * c[:, 1:2 * k:2]
        uniq, inv = np.unique(v, axis=0, return_inverse=True)
        w = np.bincount(inv.ravel(), weights=X.weights, minlength=len(uniq))
        Y = FiniteMMSpace(orbit_space_distances(uniq), w, coords=uniq)
    else:
        raise ValueError(f"unknown projection kind {kind!r}")
    f = PointMap(X, Y, inv.ravel().astype(np.int64), tag=f"{kind}:{k}")
    cert = certify_lipschitz_order(f, X, Y, tol)
    if not cert.certified:
        raise SpaceError(f"projection is not a domination map (excess {cert.worst_excess:.3g})")
    return Projection(v, Y, f, cert)


def radial_truncation(theta: float, n: int, x):
    """Radial clamp onto the closed ball of radius theta·sqrt(n)."""
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    x = np.asarray(x, dtype=float)
    rad = theta * math.sqrt(n)
    norm = np.linalg.norm(x, axis=-1, keepdims=True)
    scale = np.where(norm > rad, rad / np.where(norm > 0, norm, 1.0), 1.0)
    return x * scale


def gaussian_annulus_mass(n: int, theta: float) -> float:
    """Standard Gaussian mass in R^{n+1} of theta·sqrt(n) ≤ |x| ≤ sqrt(n)/theta."""
    if not 0 < theta <= 1:
        raise ValueError("theta must lie in (0, 1]")
    if theta == 1:
        return 0.0
    k = (n + 1) / 2.0
    lo = (theta * theta * n) / 2.0
    hi = (n / (theta * theta)) / 2.0
    # chi-square CDF via the regularized lower incomplete gamma
    return float(special.gammaincc(k, lo) - special.gammaincc(k, hi))


def spherical_cap_mass(n: int, t: float, r: float = 1.0) -> float:
    """Normalized volume of a geodesic ball of radius ``t`` in S^n(r).

    The sine-power integral is evaluated through the regularized incomplete
    beta function.
    """
    if not 0 <= t <= math.pi * r + 1e-12:
        raise ValueError("t must lie in [0, pi r]")
    phi = min(t / r, math.pi)
    if phi >= math.pi:
        return 1.0
    s = math.sin(phi) ** 2
    half = 0.5 * special.betainc(n / 2.0, 0.5, s)
    return float(half if phi <= math.pi / 2 else 1.0 - half)


def std_normal_interval(r: float) -> float:
    """Standard Gaussian mass of [0, r]."""
    if r < 0:
        raise ValueError("r must be nonnegative")
    return 0.5 * math.erf(r / math.sqrt(2.0))


def std_normal_interval_inv(p: float) -> float:
    if not 0 <= p < 0.5:
        raise ValueError("value must lie in [0, 1/2)")
    if p == 0:
        return 0.0
    hi = 1.0
    while std_normal_interval(hi) < p:
        hi *= 2
    return brentq(lambda x: std_normal_interval(x) - p, 0.0, hi, xtol=1e-15)


def normal_obsdiam_limit(kappa: float, lam: float = 1.0) -> float:
    return 2 * lam * std_normal_interval_inv((1 - kappa) / 2)


RADIUS_LAWS = ("c * n^p", "n^p", "sqrt_n", "sqrt_2n_plus_1", "const c")


def parse_radius_law(text: str):
    """Radius law from the grammar ``c * n^p``, ``n^p``, ``sqrt_n``,
    ``sqrt_2n_plus_1``, ``const c``. Returns a function of ``n``."""
    s = text.strip().replace(" ", "")
    if s == "sqrt_n":
        return lambda n: math.sqrt(n)
    if s == "sqrt_2n_plus_1":
        return lambda n: math.sqrt(2 * n + 1)
    if s.startswith("const"):
        c = float(s[5:])
        if c <= 0:
            raise ValueError("radius must be positive")
        return lambda n: c
    c = 1.0
    if "*" in s:
        head, s = s.split("*", 1)
        c = float(head)
    if not s.startswith("n^"):
        raise ValueError(f"radius law {text!r} not in grammar {RADIUS_LAWS}")
    p = s[2:]
    if "/" in p:
        a, b = p.split("/", 1)
        p = float(a) / float(b)
    else:
        p = float(p)
    if c <= 0:
        raise ValueError("radius must be positive")
    return lambda n: c * float(n) ** p


def spherical_cap_radius(n: int, mass: float, r: float = 1.0) -> float:
    """Geodesic radius of the cap of S^n(r) with normalized volume ``mass``."""
    if not 0 <= mass <= 1:
        raise ValueError("mass must lie in [0, 1]")
    if mass == 0:
        return 0.0
    if mass == 1:
        return math.pi * r
    return brentq(lambda t: spherical_cap_mass(n, t, r) - mass, 0.0, math.pi * r, xtol=1e-14)


@dataclass
class IsoperimetryCheck:
    mass: float
    cap_radius: float
    neighbourhood_mass: float
    cap_neighbourhood_mass: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.neighbourhood_mass >= self.cap_neighbourhood_mass - self.tolerance

    def to_json(self):
        return {**asdict(self), "passed": self.passed}


def isoperimetry_spot_check(centers, s: float, t: float, probe, n: int, r: float = 1.0,
                            z: float = 4.0) -> IsoperimetryCheck:
    """Compare the t-neighbourhood of a closed set with that of a cap of equal mass.

    The set is the union of closed geodesic balls of radius ``s`` around the
    rows of ``centers`` (points of S^n(r)); its t-neighbourhood is the union
    of radius s + t balls. Both masses are estimated on the independent
    uniform ``probe`` points. The tolerance is ``z`` binomial standard errors
    on each estimate: the set mass is lowered by its error before the cap
    prediction, and the neighbourhood error is subtracted from it.
    """
    if s < 0 or t < 0:
        raise ValueError("s and t must be nonnegative")
    centers = np.asarray(centers, dtype=float)
    probe = np.asarray(probe, dtype=float)
    G = np.clip(probe @ centers.T / (r * r), -1.0, 1.0)
    d = r * np.arccos(G).min(axis=1)
    m = len(probe)
    mass = float(np.mean(d <= s))
    got = float(np.mean(d < s + t))
    low = max(mass - z * math.sqrt(mass * (1 - mass) / m), 0.0)
    rad = spherical_cap_radius(n, low, r)
    want = spherical_cap_mass(n, min(rad + t, math.pi * r), r)
    tol = z * math.sqrt(max(got * (1 - got), 1.0 / m) / m)
    return IsoperimetryCheck(mass, rad, got, want, tol)
