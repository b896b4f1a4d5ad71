"""Time the compiled and pure-Python kernel backends on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Prints one line per kernel with the best-of-``repeat`` wall time for each
backend and the speedup; both backends must agree on every output.
"""

import argparse
import time

import numpy as np

from mmlimits import _kernels


def best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def cases():
    g = np.random.default_rng(0)

    n = 400
    a, b = g.integers(1, 50, n), g.integers(1, 50, n)
    mask = g.random((n, n)) < 0.02
    el, er = np.nonzero(mask)
    yield "max_flow 400x400", lambda k: _kernels.max_flow(a, b, el, er, backend=k)

    x = np.sort(g.normal(size=5000))
    y = np.sort(g.normal(size=5000))
    xc, yc = np.ones(5000, np.int64), np.ones(5000, np.int64)
    yield "interval_flow 5000", lambda k: _kernels.get(k).interval_flow(x, xc, y, yc, 0.01, False)

    v = np.sort(g.normal(size=200_000))
    cum = np.concatenate([[0.0], np.cumsum(np.full(len(v), 1 / len(v)))])
    yield "partial_diameter 2e5", lambda k: _kernels.get(k).partial_diameter_sorted(v, cum, 0.9)

    h = np.sort(g.normal(size=3000))
    cum_h = np.concatenate([[0.0], np.cumsum(np.full(3000, 1 / 3000))])
    yield "me_shift_scan 3000", lambda k: _kernels.get(k).me_shift_scan(h, cum_h)

    pts = g.normal(size=(14, 2))
    D = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
    w = g.integers(1, 6, 14)
    yield "sep2_exhaustive 14", lambda k: _kernels.get(k).sep2_exhaustive(D, w, 10, 10)

    C = g.random((600, 600)) < 0.05
    C = np.ascontiguousarray((C | C.T).astype(np.uint8))
    np.fill_diagonal(C, 0)
    mass = g.integers(1, 10, 600)
    yield "peel 600", lambda k: np.asarray(_kernels.get(k).peel(C, mass))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if "cython" not in _kernels.BACKENDS:
        raise SystemExit("compiled backend not built; run pip install -e . --no-build-isolation")
    print(f"{'kernel':<24}{'cython s':>12}{'python s':>12}{'speedup':>10}")
    for name, fn in cases():
        tc, oc = best_of(lambda: fn("cython"), args.repeat)
        tp, op = best_of(lambda: fn("python"), args.repeat)
        same = np.array_equal(np.asarray(oc, dtype=object), np.asarray(op, dtype=object))
        if not same:
            raise SystemExit(f"{name}: backends disagree")
        print(f"{name:<24}{tc:>12.4f}{tp:>12.4f}{tp / tc:>10.1f}")


if __name__ == "__main__":
    main()
