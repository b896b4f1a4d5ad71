"""Standard-error calibration for the Monte Carlo acceptance statistics.

Each statistic is recomputed on seeds disjoint from the acceptance seed (7);
the spread over replicates sets the scale the acceptance tolerances are
compared against. Run once; the result is stored in tests/data/oracle_study.json.

    python3 benchmarks/oracle_study.py
"""

import json
import math
import time
from pathlib import Path

import numpy as np

from mmlimits import __version__
from mmlimits.invariants import default_family, obs_diameter
from mmlimits.lab import (cpn_obsdiam_bounds, mb_convergence, nonconcentration_constant,
                          nonconcentration_root, normal_law_rearrangement,
                          sphere_distance_pushforward)
from mmlimits.measurements import pyramid_rho
from mmlimits.models import SphereSpec, gaussian_annulus_mass, normal_obsdiam_limit, sample_sphere

SEEDS = [101, 102, 103, 104, 105]
OUT = Path(__file__).resolve().parent.parent / "tests" / "data" / "oracle_study.json"


def summary(values):
    v = np.asarray(values, dtype=float)
    return {"values": v.tolist(), "mean": float(v.mean()), "sd": float(v.std(ddof=1)),
            "se_mean": float(v.std(ddof=1) / math.sqrt(len(v)))}


def timed(label, fn):
    t = time.time()
    out = fn()
    print(f"{label}: {time.time() - t:.1f}s")
    return out


def main():
    study = {"version": __version__, "seeds": SEEDS}

    def obsdiam():
        vals = []
        for s in SEEDS:
            X = sample_sphere(SphereSpec(200, math.sqrt(200), m=5000, seed=s))
            vals.append(obs_diameter(X, 0.1, default_family(X, seed=s), keep_witness=False).value)
        return dict(summary(vals), limit=normal_obsdiam_limit(0.1))

    def mb():
        tables = [[r["d_P"] for r in mb_convergence([25, 50, 100, 200], 1, 1.0, 20_000, s)]
                  for s in SEEDS]
        rises = [max(b - a for a, b in zip(t, t[1:])) for t in tables]
        return {"final": summary([t[-1] for t in tables]), "largest_rise": summary(rises),
                "tables": tables}

    def nonconc():
        rows = [[r["me"] for r in nonconcentration_constant([2, 10, 50], 100_000, s)]
                for s in SEEDS]
        flat = [v for r in rows for v in r]
        return dict(summary(flat), root=nonconcentration_root(),
                    spread=summary([max(r) - min(r) for r in rows]))

    def normal():
        return summary([normal_law_rearrangement(
            sphere_distance_pushforward(200, math.sqrt(200), 200_000, s)).lipschitz_violation
            for s in SEEDS])

    def cpn():
        vals = [cpn_obsdiam_bounds(100, math.sqrt(201), 0.1, 5000, s) for s in SEEDS]
        return dict(summary([b.estimate for b in vals]), lower_ref=vals[0].lower_ref,
                    upper_ref=vals[0].upper_ref)

    def rho_same():
        vals = []
        for s in SEEDS[:3]:
            A = sample_sphere(SphereSpec(30, math.sqrt(30), m=1000, seed=s))
            B = sample_sphere(SphereSpec(30, math.sqrt(30), m=1000, seed=s + 50))
            vals.append(pyramid_rho(A, B, seed=s).value)
        return summary(vals)

    study["obsdiam_sphere200"] = timed("obsdiam", obsdiam)
    study["mb_k1"] = timed("mb", mb)
    study["nonconc_me"] = timed("nonconc", nonconc)
    study["normal_law_violation"] = timed("normal", normal)
    study["cpn100_estimate"] = timed("cpn", cpn)
    study["rho_same_sphere30"] = timed("rho", rho_same)
    p = gaussian_annulus_mass(100, 0.8)
    study["annulus_100_08"] = {"mass": p, "binomial_se_m1e5": math.sqrt(p * (1 - p) / 1e5)}

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(study, indent=2, sort_keys=True) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
