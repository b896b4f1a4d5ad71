"""The fourteen acceptance criteria at their stated tolerances.

Each test prints one ``criterion N: PASS|FAIL`` line (also collected in the
terminal summary). Monte Carlo statistics cite the replicate spread from
tests/data/oracle_study.json, produced by benchmarks/oracle_study.py.
"""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from mmlimits.cli import main as cli_main
from mmlimits.distances import box_exact_tiny, box_upper, me_distance, prokhorov, prokhorov_matrix
from mmlimits.invariants import (CandidateFamily, ScalarPushforward, default_family,
                                 distance_to_set, obs_diameter, separation)
from mmlimits.lab import (cpn_obsdiam_bounds, dissipation_scaling, gaussian_chain,
                          mb_convergence, nonconcentration_constant, normal_law_rearrangement,
                          sphere_distance_pushforward, trichotomy)
from mmlimits.measurements import pyramid_rho
from mmlimits.mmspace import FiniteMMSpace, scale_space
from mmlimits.models import (SphereSpec, gaussian_annulus_mass, isoperimetry_spot_check,
                             normal_obsdiam_limit, sample_sphere, sphere_points)
from oracles import nonconc_root

STUDY = json.loads((Path(__file__).parent / "data" / "oracle_study.json").read_text())
SEED = 7


@pytest.fixture
def report(acceptance_lines):
    def emit(num, ok, detail):
        line = f"criterion {num}: {'PASS' if ok else 'FAIL'} {detail}"
        print(line)
        acceptance_lines.append(line)
        assert ok, line
    return emit


def random_space(g, n, dim=2, uniform=False):
    w = np.full(n, 1.0 / n) if uniform else g.dirichlet(np.ones(n))
    x = g.normal(size=(n, dim))
    X = FiniteMMSpace.from_points(x, w)
    return FiniteMMSpace(X.dist, X.weights, coords=x)


def test_criterion_01_obsdiam_limit(report):
    t = time.perf_counter()
    X = sample_sphere(SphereSpec(200, math.sqrt(200), m=5000, seed=SEED))
    v = obs_diameter(X, 0.1, default_family(X, seed=SEED), keep_witness=False).value
    dt = time.perf_counter() - t
    sd = STUDY["obsdiam_sphere200"]["sd"]
    report(1, 2.9 <= v <= 3.6 and dt < 120,
           f"estimate {v:.4f} in [2.9, 3.6], limit {normal_obsdiam_limit(0.1):.4f}, "
           f"{dt:.1f}s < 120s (study sd {sd:.4f})")


def test_criterion_02_maxwell_boltzmann(report):
    t = time.perf_counter()
    rows = mb_convergence([25, 50, 100, 200], k=1, lam=1.0, m=20_000, seed=SEED)
    dt = time.perf_counter() - t
    d = [r["d_P"] for r in rows]
    band = all(b <= a + 0.01 for a, b in zip(d, d[1:]))
    sd = STUDY["mb_k1"]["final"]["sd"]
    report(2, d[-1] <= 0.05 and band and dt < 180,
           f"d_P {[round(v, 4) for v in d]}, final ≤ 0.05, band 0.01 {band}, {dt:.1f}s < 180s "
           f"(study sd of final {sd:.4f})")


def test_criterion_03_trichotomy(report):
    want = {"n^1/3": "levy", "n^1": "dissipate", "sqrt_n": "converge"}
    got, stable = {}, True
    for law in want:
        a = trichotomy(law, [25, 50, 100, 200], seed=SEED)
        b = trichotomy(law, [25, 50, 100, 200], seed=SEED)
        stable &= json.dumps(a.to_json(), sort_keys=True) == json.dumps(b.to_json(), sort_keys=True)
        got[law] = a.verdict
    report(3, got == want and stable, f"verdicts {got}, deterministic {stable}")


def test_criterion_04_dissipation_scaling(report):
    g = np.random.default_rng(SEED)
    worst = 0.0
    for i in range(20):
        n = int(g.integers(2, 60))
        X = sample_sphere(SphereSpec(n, math.sqrt(n), m=int(g.integers(6, 15)), seed=i))
        r = float(g.choice([n ** (1 / 3), float(n), 5 * math.sqrt(n), 0.5]))
        k = tuple(g.choice([0.1, 0.2, 0.3], 2))
        base, scaled = dissipation_scaling(X, r / math.sqrt(n), k, method="exact")
        want = (r / math.sqrt(n)) * base
        worst = max(worst, abs(scaled - want) / want if want else abs(scaled))
    report(4, worst <= 1e-12, f"worst relative error {worst:.2e} ≤ 1e-12 over 20 instances")


def test_criterion_05_scale_law(report):
    g = np.random.default_rng(SEED)
    worst = 0.0
    for i in range(20):
        X = random_space(g, int(g.integers(1, 30)))
        fam = default_family(X, directions=8, seed=i)
        kappa = float(g.choice([0.05, 0.1, 0.25, 0.4]))
        b = obs_diameter(X, kappa, fam).value
        for t in (0.5, 2.0, 10.0):
            a = obs_diameter(scale_space(t, X), kappa, fam.scaled(t)).value
            worst = max(worst, abs(a - t * b) / (t * b) if b else abs(a))
    report(5, worst <= 1e-12, f"worst relative error {worst:.2e} ≤ 1e-12, t in (1/2, 2, 10)")


def test_criterion_06_sandwich(report):
    g = np.random.default_rng(SEED)
    bad = []
    for i in range(50):
        X = random_space(g, int(g.integers(1, 13)))
        kappa = float(g.choice([0.1, 0.2, 0.25, 0.3, 0.45]))
        fam = default_family(X, directions=8, seed=i)
        sep = separation(X, (kappa, kappa), "exact")
        if 2 * kappa < 1 and obs_diameter(X, 2 * kappa, fam).value > sep.value:
            bad.append((i, "lower"))
        if sep.value > 0:
            aug = fam.union(CandidateFamily().add("distance-to-set", "values",
                                                  distance_to_set(X, sep.sets[0])[None]))
            for kp in (0.5 * kappa, 0.99 * kappa):
                if sep.value > obs_diameter(X, kp, aug).value:
                    bad.append((i, "upper", kp))
    report(6, not bad, f"{50 - len({b[0] for b in bad})}/50 spaces satisfy both inequalities")


def test_criterion_07_metric_comparisons(report):
    g = np.random.default_rng(SEED)
    me_bad = 0
    for _ in range(100):
        n = int(g.integers(1, 40))
        f, h = g.normal(size=(2, n)) * g.choice([0.1, 1.0, 3.0])
        w = g.dirichlet(np.ones(n))
        if prokhorov(ScalarPushforward.of(f, w), ScalarPushforward.of(h, w)) > me_distance(f, h, w):
            me_bad += 1
    box_bad, count = 0, 0
    for seed in range(20):
        gs = np.random.default_rng(seed)
        for n in range(1, 5):
            X = random_space(gs, n)
            mu, nu = gs.dirichlet(np.ones(n)), gs.dirichlet(np.ones(n))
            v = box_exact_tiny(FiniteMMSpace(X.dist, mu), FiniteMMSpace(X.dist, nu))
            count += 1
            if v > 2 * prokhorov_matrix(X.dist, mu, nu):
                box_bad += 1
    report(7, me_bad == 0 and box_bad == 0,
           f"d_P ≤ me on {100 - me_bad}/100; box ≤ 2 d_P on {count - box_bad}/{count}")


def test_criterion_08_box_oracle(report):
    worst, count = 0.0, 0
    for seed in range(20):
        g = np.random.default_rng(seed)
        for n in range(1, 5):
            for m in range(1, 5):
                X, Y = random_space(g, n), random_space(g, m)
                worst = max(worst, abs(box_upper(X, Y, seed=seed).value - box_exact_tiny(X, Y)))
                count += 1
    report(8, worst <= 1e-9, f"max |box_upper - box_exact_tiny| {worst:.2e} over {count} instances")


def test_criterion_09_pyramid_metric(report):
    A = sample_sphere(SphereSpec(30, math.sqrt(30), m=1000, seed=SEED))
    B = sample_sphere(SphereSpec(30, math.sqrt(30), m=1000, seed=SEED + 1))
    C = sample_sphere(SphereSpec(30, 5 * math.sqrt(30), m=1000, seed=SEED))
    G = gaussian_chain(6, 1.0, 1000, SEED)
    same = pyramid_rho(A, B, seed=SEED)
    conv = pyramid_rho(A, G, seed=SEED)
    diss = pyramid_rho(C, G, seed=SEED)
    bounded = all(r.value + r.tail_bound <= 0.25 for r in (same, conv, diss))
    ok = same.value <= 0.05 and bounded and conv.value < diss.value
    sd = STUDY["rho_same_sphere30"]["sd"]
    report(9, ok, f"same {same.value:.4f} ≤ 0.05, convergent {conv.value:.4f} < dissipative "
                  f"{diss.value:.4f}, rho+tail ≤ 0.25 {bounded} (study sd same {sd:.4f})")


def test_criterion_10_nonconcentration(report):
    rows = nonconcentration_constant([2, 10, 50], m=100_000, seed=SEED)
    v = [r["me"] for r in rows]
    root = nonconc_root()
    spread = max(v) - min(v)
    near = max(abs(x - root) for x in v)
    ok = spread <= 0.02 and near <= 0.03 and abs(root - 0.6472076) < 1e-7
    report(10, ok, f"me {[round(x, 4) for x in v]}, spread {spread:.4f} ≤ 0.02, "
                   f"max |me - {root:.5f}| {near:.4f} ≤ 0.03 "
                   f"(study sd {STUDY['nonconc_me']['sd']:.4f})")


def test_criterion_11_annulus_and_caps(report):
    n, theta, m = 100, 0.8, 100_000
    x = np.random.default_rng(SEED).standard_normal((m, n + 1))
    nr = np.linalg.norm(x, axis=1)
    mc = float(np.mean((nr >= theta * math.sqrt(n)) & (nr <= math.sqrt(n) / theta)))
    closed = gaussian_annulus_mass(n, theta)
    big = gaussian_annulus_mass(500, 0.9)
    g = np.random.default_rng(SEED)
    pool = sphere_points(10, 1.0, 1000, SEED)
    probe = sphere_points(10, 1.0, 100_000, SEED + 1)
    passed = 0
    for _ in range(20):
        centers = pool[g.choice(len(pool), int(g.integers(1, 31)), replace=False)]
        res = isoperimetry_spot_check(centers, g.uniform(0.7, 1.2), g.uniform(0.1, 0.5), probe, 10)
        passed += res.passed
    ok = abs(mc - closed) <= 0.01 and big >= 0.99 and passed == 20
    se = STUDY["annulus_100_08"]["binomial_se_m1e5"]
    report(11, ok, f"annulus MC {mc:.4f} vs closed {closed:.4f} (se {se:.4f}); "
                   f"(500, 0.9) mass {big:.5f} ≥ 0.99; isoperimetry {passed}/20")


def test_criterion_12_normal_law(report):
    p = sphere_distance_pushforward(200, math.sqrt(200), 200_000, SEED)
    res = normal_law_rearrangement(p)
    g = np.random.default_rng(SEED)
    always = all(normal_law_rearrangement(ScalarPushforward.of(
        g.standard_cauchy(k), g.dirichlet(np.ones(k))), np.linspace(-3, 3, 41)).monotone
        for k in g.integers(1, 200, 30))
    ok = res.lipschitz_violation <= 0.05 and res.monotone and always
    report(12, ok, f"violation {res.lipschitz_violation:.4f} ≤ 0.05, monotone {res.monotone}, "
                   f"monotone on 30 random inputs {always} "
                   f"(study sd {STUDY['normal_law_violation']['sd']:.4f})")


def test_criterion_13_cpn_bracket(report):
    b = cpn_obsdiam_bounds(100, math.sqrt(201), 0.1, 5000, SEED)
    pointwise = True
    for k in (1, 2):
        q = mb_convergence([25, 50, 100, 200], k=k, m=2000, seed=SEED, variant="cpn")
        s = mb_convergence([25, 50, 100, 200], k=k, m=2000, seed=SEED, variant="cpn_sphere")
        pointwise &= all(a["d_P"] <= c["d_P"] for a, c in zip(q, s))
    ok = b.inside(0.15) and pointwise
    report(13, ok, f"estimate {b.estimate:.4f} in [{b.lower_ref - 0.15:.4f}, "
                   f"{b.upper_ref + 0.15:.4f}], quotient ≤ sphere pointwise {pointwise} "
                   f"(study sd {STUDY['cpn100_estimate']['sd']:.4f})")


def test_criterion_14_reproducibility(report, tmp_path, capsys):
    def run(tag):
        out = {"json": str(tmp_path / f"{tag}.json"), "csv": str(tmp_path / f"{tag}.csv")}
        manifest = {"command": "trichotomy", "seed": SEED,
                    "params": {"radius_law": "sqrt_n", "grid": "25:200", "m": 500}, "outputs": out}
        path = tmp_path / f"{tag}-manifest.json"
        path.write_text(json.dumps(manifest))
        code = cli_main(["run", str(path)])
        capsys.readouterr()
        return code, Path(out["json"]).read_bytes(), Path(out["csv"]).read_bytes()

    a, b = run("a"), run("b")
    ok = a[0] == b[0] == 0 and a[1:] == b[1:]
    report(14, ok, f"two manifest runs exit {a[0]}/{b[0]}, artifacts byte-identical {a[1:] == b[1:]}")
