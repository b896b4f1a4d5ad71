"""Numerical experiments for the limit laws of spheres and projective spaces."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special
from scipy.optimize import brentq, minimize_scalar

from ._util import rng
from .distances import hausdorff_measures, me_distance, prokhorov, prokhorov_matrix
from .invariants import (ScalarPushforward, default_family, obs_diameter,
                         pushforward_separation, separation)
from .measurements import PyramidApprox, measurement_set
from .mmspace import FiniteMMSpace
from .models import (ProjectiveSpec, SphereSpec, gaussian_points, normal_obsdiam_limit,
                     orbit_space_distances, sample_cpn, sample_sphere, sphere_points)


class ResourceError(RuntimeError):
    """A requested cell would exceed the memory cap."""


# largest m for which an m x m distance matrix is built
MATRIX_CAP = 20_000


def _check_matrix(m):
    if m > MATRIX_CAP:
        raise ResourceError(f"m={m} needs an {m}x{m} distance matrix; reduce m to ≤ {MATRIX_CAP}")


# -- Maxwell-Boltzmann -------------------------------------------------------

def _reference_gaussian(k, lam, m, seed):
    return lam * rng(seed, 0x7EF, k).standard_normal((m, k))


def _cloud(points):
    from .measurements import MeasureOnRN

    return MeasureOnRN(points, np.full(len(points), 1.0 / len(points)))


def mb_convergence(n_grid, k: int = 1, lam: float = 1.0, m: int = 20_000, seed: int = 0,
                   variant: str = "sphere"):
    """Prokhorov distance between projected sphere samples and a Gaussian sample.

    ``variant="sphere"``: first ``k`` coordinates of S^n(lam·sqrt(n)) against
    gamma^k, in R^k. ``variant="cpn"``: first ``k`` complex coordinates of
    S^{2n+1}(lam·sqrt(2n+1)), compared in C^k / S^1 against the orbit image
    of a gamma^{2k} sample. ``variant="cpn_sphere"`` is the same pair of
    samples compared before taking orbits, in R^{2k}. The reference sample
    is shared by all ``n``.
    """
    n_grid = [int(n) for n in n_grid]
    if variant == "sphere":
        if k > min(n_grid) + 1:
            raise ValueError("k exceeds the ambient dimension")
    elif variant in ("cpn", "cpn_sphere"):
        if k > min(n_grid) + 1:
            raise ValueError("k exceeds the complex dimension")
    else:
        raise ValueError(f"unknown variant {variant!r}")
    rows = []
    real_dim = k if variant == "sphere" else 2 * k
    ref = _reference_gaussian(real_dim, lam, m, seed)
    for n in n_grid:
        if variant == "sphere":
            x = sphere_points(n, lam * math.sqrt(n), m, seed + n)[:, :k]
        else:
            x = sphere_points(2 * n + 1, lam * math.sqrt(2 * n + 1), m, seed + n)[:, :2 * k]
        if variant == "cpn":
            d = _orbit_prokhorov(x, ref, k)
        else:
            d = prokhorov(_cloud(x), _cloud(ref), p=2 if real_dim > 1 else np.inf)
        rows.append({"n": n, "k": k, "lam": lam, "m": m, "d_P": d})
    return rows


def _orbit_prokhorov(x, ref, k):
    zx = x[:, 0::2] + 1j * x[:, 1::2]
    zr = ref[:, 0::2] + 1j * ref[:, 1::2]
    if k == 1:
        # C / S^1 is the half-line of moduli
        return prokhorov(_cloud(np.abs(zx)), _cloud(np.abs(zr)))
    _check_matrix(len(zx) + len(zr))
    D = orbit_space_distances(np.concatenate([zx, zr]))[:len(zx), len(zx):]
    w = np.full(len(zx), 1.0 / len(zx))
    return prokhorov_matrix(D, w, np.full(len(zr), 1.0 / len(zr)))


# -- normal law --------------------------------------------------------------

@dataclass
class Rearrangement:
    grid: list
    alpha: list
    lipschitz_violation: float
    monotone: bool

    def to_json(self):
        return asdict(self)


def normal_law_rearrangement(p: ScalarPushforward, grid=None) -> Rearrangement:
    """Monotone map carrying gamma^1 to ``p``, sampled on a grid.

    alpha(x) is the smallest atom x' with p(-inf, x'] ≥ Phi(x); the
    violation is the largest slope excess over 1 between adjacent grid
    points, floored at 0.
    """
    if abs(p.weights.sum() - 1.0) > 1e-12:
        raise ValueError("input mass must be 1")
    grid = np.linspace(-2.0, 2.0, 17) if grid is None else np.asarray(grid, dtype=float)
    cdf = np.cumsum(p.weights)
    target = special.ndtr(grid)
    idx = np.minimum(np.searchsorted(cdf, target - 1e-12, side="left"), len(cdf) - 1)
    alpha = p.values[idx]
    dx = np.diff(grid)
    viol = float(np.max(np.concatenate([[0.0], (np.diff(alpha) - dx) / dx])))
    return Rearrangement(grid.tolist(), alpha.tolist(), viol, bool(np.all(np.diff(alpha) >= 0)))


def sphere_distance_pushforward(n: int, r: float, m: int, seed: int) -> ScalarPushforward:
    """Geodesic distance to a fixed pole, pushed forward from a sphere sample."""
    x = sphere_points(n, r, m, seed)
    d = r * np.arccos(np.clip(x[:, 0] / r, -1.0, 1.0))
    return ScalarPushforward.of(d, np.full(m, 1.0 / m))


# -- trichotomy --------------------------------------------------------------

DEFAULT_THRESHOLDS = {
    "slope_levy": -0.08,       # ObsDiam log-log slope at or below this: concentrating
    "slope_dissipate": 0.08,   # Sep log-log slope at or above this ...
    "sep_growth": 2.0,         # ... and Sep growing at least this factor: dissipating
    "h_converge": 0.08,        # final measurement Hausdorff at or below this ...
    "h_band": 0.02,            # ... non-increasing within this band
    "slope_flat": 0.08,        # and both slopes inside +-this: converging
}


@dataclass
class TrichotomyReport:
    n_grid: list
    rows: list
    verdict: str
    slopes: dict
    reference_lambda: float
    thresholds: dict = field(default_factory=lambda: dict(DEFAULT_THRESHOLDS))

    def to_json(self):
        return asdict(self)


def loglog_slope(ns, values):
    v = np.asarray(values, dtype=float)
    if np.any(v <= 0):
        return float("nan")
    return float(np.polyfit(np.log(ns), np.log(v), 1)[0])


def classify(ns, obs, sep, h, thresholds=None) -> tuple[str, dict]:
    t = dict(DEFAULT_THRESHOLDS, **(thresholds or {}))
    s_obs = loglog_slope(ns, obs)
    s_sep = loglog_slope(ns, sep)
    slopes = {"obsdiam": s_obs, "sep": s_sep}
    if s_obs <= t["slope_levy"] and obs[-1] < obs[0]:
        return "levy", slopes
    if s_sep >= t["slope_dissipate"] and sep[-1] >= t["sep_growth"] * sep[0]:
        return "dissipate", slopes
    h = np.asarray(h, dtype=float)
    steady = bool(np.all(np.diff(h) <= t["h_band"]))
    flat = abs(s_obs) <= t["slope_flat"] and abs(s_sep) <= t["slope_flat"]
    if h[-1] <= t["h_converge"] and steady and flat:
        return "converge", slopes
    return "inconclusive", slopes


def gaussian_chain(k_max: int, lam: float, m: int, seed: int) -> PyramidApprox:
    """Gaussian spaces of dimension 1..k_max from one sample, linked by projections."""
    x = gaussian_points(k_max, lam, m, seed)
    spaces = [FiniteMMSpace.from_points(x[:, :k]) for k in range(1, k_max + 1)]
    links = [np.arange(m) for _ in range(k_max - 1)]
    return PyramidApprox(spaces, links, label=f"gaussian(lam={lam})")


def trichotomy(radius_law, n_grid, family: str = "sphere", kappa: float = 0.1,
               m: int = 1000, seed: int = 0, budget: int = 8, k_ref: int = 4,
               directions: int = 64, thresholds=None) -> TrichotomyReport:
    """Per-n ObsDiam, separation and measurement distance to a Gaussian reference.

    ``radius_law`` maps n to r_n. Separation is measured on the pushforwards
    of the candidate family: at desk-scale m the sample itself is nearly
    equilateral, so its own separation reflects sampling sparsity rather than
    the sphere. The Gaussian reference uses lambda = r_N / sqrt(N) at the
    last grid point N.
    """
    from .models import parse_radius_law

    law = parse_radius_law(radius_law) if isinstance(radius_law, str) else radius_law
    ns = [int(n) for n in n_grid]
    _check_matrix(m)
    dim = (lambda n: n) if family == "sphere" else (lambda n: 2 * n + 1)
    lam_ref = law(ns[-1]) / math.sqrt(dim(ns[-1]))
    ref = gaussian_chain(k_ref, lam_ref, m, seed)
    M_ref = measurement_set(ref, 1, 1.0, budget, seed)
    rows = []
    for n in ns:
        r = law(n)
        if family == "sphere":
            X = sample_sphere(SphereSpec(n, r, "geodesic", m, seed + n))
        elif family == "cpn":
            X = sample_cpn(ProjectiveSpec(n, r, "fubini_study", m, seed + n))
        else:
            raise ValueError(f"unknown family {family!r}")
        fam = default_family(X, directions=directions, seed=seed)
        obs = obs_diameter(X, kappa, fam, keep_witness=False).value
        sep, _ = pushforward_separation(X, [kappa, kappa], fam)
        MX = measurement_set(X, 1, 1.0, budget, seed)
        h = hausdorff_measures(MX.members, M_ref.members)
        rows.append({"n": n, "r": r, "lambda": r / math.sqrt(dim(n)), "obsdiam": obs,
                     "sep": sep, "h1": h})
    verdict, slopes = classify(ns, [r["obsdiam"] for r in rows], [r["sep"] for r in rows],
                               [r["h1"] for r in rows], thresholds)
    return TrichotomyReport(ns, rows, verdict, slopes, lam_ref,
                            dict(DEFAULT_THRESHOLDS, **(thresholds or {})))


def dissipation_scaling(X: FiniteMMSpace, factor: float, kappas, **kw):
    """Separation of a sample and of its rescaling, on the same points."""
    from .mmspace import scale_space

    base = separation(X, kappas, **kw)
    scaled = separation(scale_space(factor, X), kappas, **kw)
    return base.value, scaled.value


# -- non-concentration constant ---------------------------------------------

def nonconcentration_root() -> float:
    """Root of 2(1 - Phi(eps / sqrt 2)) = eps."""
    return brentq(lambda e: 2 * (1 - special.ndtr(e / math.sqrt(2))) - e, 1e-6, 1.0,
                  xtol=1e-14)


def nonconcentration_constant(n_grid, m: int = 100_000, seed: int = 0, i: int = 0, j: int = 1):
    """me distance, modulo constants, between two coordinates of a gamma^n sample."""
    rows = []
    for n in n_grid:
        n = int(n)
        if n < 2 or not (0 <= i < n and 0 <= j < n):
            raise ValueError("need n ≥ 2 and coordinates inside 0..n-1")
        x = gaussian_points(n, 1.0, m, seed + n)
        v = me_distance(x[:, i], x[:, j], optimize_shift=True)
        rows.append({"n": n, "m": m, "i": i, "j": j, "me": v})
    return rows


# -- CP^n observable diameter bracket ---------------------------------------

def rayleigh_min_window(alpha: float) -> float:
    """Shortest interval carrying mass alpha under the density r exp(-r^2/2)."""
    cdf = lambda r: -math.expm1(-r * r / 2)
    inv = lambda p: math.sqrt(-2 * math.log1p(-p))

    def length(a):
        return inv(min(cdf(a) + alpha, 1 - 1e-16)) - a

    hi = inv(1 - alpha)
    res = minimize_scalar(length, bounds=(0.0, hi), method="bounded",
                          options={"xatol": 1e-12})
    return float(min(res.fun, length(0.0)))


@dataclass
class CpnBracket:
    n: int
    r: float
    kappa: float
    estimate: float
    lower_ref: float
    upper_ref: float
    lam: float
    witness_tag: str

    def to_json(self):
        return asdict(self)

    def inside(self, tol: float) -> bool:
        return self.lower_ref - tol <= self.estimate <= self.upper_ref + tol


def cpn_obsdiam_bounds(n: int, r: float, kappa: float = 0.1, m: int = 5000, seed: int = 0,
                       directions: int = 64) -> CpnBracket:
    """ObsDiam estimate on a CP^n(r) sample between the Rayleigh and Gaussian limits."""
    _check_matrix(m)
    X = sample_cpn(ProjectiveSpec(n, r, "fubini_study", m, seed))
    fam = default_family(X, directions=directions, seed=seed)
    res = obs_diameter(X, kappa, fam, keep_witness=False)
    lam = r / math.sqrt(2 * n + 1)
    return CpnBracket(n, r, kappa, res.value, lam * rayleigh_min_window(1 - kappa),
                      normal_obsdiam_limit(kappa, lam), lam, res.witness_tag)


__all__ = [
    "mb_convergence", "normal_law_rearrangement", "sphere_distance_pushforward", "trichotomy",
    "classify", "nonconcentration_constant", "nonconcentration_root", "cpn_obsdiam_bounds",
    "rayleigh_min_window", "gaussian_chain", "dissipation_scaling", "ResourceError",
]
