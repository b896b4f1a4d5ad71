"""Small shared helpers: integer masses, seeding."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

# denominators above this switch to fixed-point masses
MAX_DENOMINATOR = 1 << 40
FIXED_POINT = 1 << 50


def integer_masses(*weight_arrays, max_den: int = 10**7):
    """Scale probability vectors to integers over one common denominator.

    Uniform-type weights (k/m) come out exact. Otherwise every vector is
    rounded to ``FIXED_POINT`` units with largest-remainder rounding so each
    still sums to the denominator exactly. Returns ``(int arrays, D)``.
    """
    arrays = [np.asarray(w, dtype=float) for w in weight_arrays]
    uniq = np.unique(np.concatenate(arrays))
    den = 1
    fracs = {}
    ok = len(uniq) <= 4096
    if ok:
        for u in uniq:
            f = Fraction(float(u)).limit_denominator(max_den)
            if abs(float(f) - u) > 1e-15 * max(u, 1e-300) + 1e-18:
                ok = False
                break
            fracs[float(u)] = f
            den = den * f.denominator // math.gcd(den, f.denominator)
            if den > MAX_DENOMINATOR:
                ok = False
                break
    if ok:
        out = []
        for w in arrays:
            ints = np.array([fracs[float(v)].numerator * (den // fracs[float(v)].denominator)
                             for v in w], dtype=np.int64)
            if int(ints.sum()) != den:
                ok = False
                break
            out.append(ints)
        if ok:
            return out, den
    return [_fixed_point(w, FIXED_POINT) for w in arrays], FIXED_POINT


def _fixed_point(w, den):
    w = w / w.sum()
    raw = w * den
    ints = np.floor(raw).astype(np.int64)
    short = den - int(ints.sum())
    if short > 0:
        order = np.argsort(-(raw - ints), kind="stable")
        ints[order[:short]] += 1
    return ints


def mass_threshold(kappa: float, den: int, tol: float = 1e-12) -> int:
    """Smallest integer mass counted as reaching ``kappa`` (with slack ``tol``)."""
    return max(int(math.ceil((kappa - tol) * den)), 0)


def rng(seed, *stream):
    """Counter-based generator whose stream is a pure function of its arguments."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *[int(s) for s in stream]])
    return np.random.Generator(np.random.Philox(ss))
