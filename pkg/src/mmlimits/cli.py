"""Command-line front end: ``mmlimits <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import traceback

import numpy as np

from . import __version__

EXIT_OK, EXIT_VALIDATION, EXIT_RESOURCE, EXIT_INTERNAL = 0, 2, 3, 4

COMMANDS = ("validate", "sample", "obsdiam", "sep", "prokhorov", "me", "box", "measure",
            "pyramid-rho", "mb", "normal-law", "trichotomy", "nonconc", "cpn-bounds")

MANIFEST_SCHEMA = {
    "type": "object",
    "required": ["command"],
    "additionalProperties": False,
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "seed": {"type": "integer", "minimum": 0},
        "params": {
            "type": "object",
            "additionalProperties": {"type": ["string", "number", "integer", "boolean", "array"]},
        },
        "thresholds": {"type": "object", "additionalProperties": {"type": "number"}},
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"json": {"type": "string"}, "csv": {"type": "string"}},
        },
    },
}


class UsageError(ValueError):
    pass


# -- helpers -----------------------------------------------------------------

def parse_grid(text: str):
    """``a:b`` doubles from a to b, ``a:b:s`` steps by s, ``a,b,c`` lists."""
    text = str(text).strip()
    if "," in text:
        return [int(v) for v in text.split(",") if v]
    parts = text.split(":")
    if len(parts) == 1:
        return [int(parts[0])]
    a, b = int(parts[0]), int(parts[1])
    if a < 1 or b < a:
        raise UsageError(f"bad grid {text!r}")
    if len(parts) == 3:
        return list(range(a, b + 1, int(parts[2])))
    out = []
    while a <= b:
        out.append(a)
        a *= 2
    return out


def parse_floats(text: str):
    return [float(v) for v in str(text).split(",") if v]


def radius_value(text: str, n: int, ambient: int | None = None) -> float:
    from .models import parse_radius_law

    try:
        return float(text)
    except ValueError:
        return parse_radius_law(text)(n)


def _stamp(obj, seed):
    obj = dict(obj)
    obj.setdefault("seed", seed)
    obj["version"] = __version__
    return obj


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def rows_to_csv(rows) -> str:
    if not rows:
        return ""
    cols = sorted({k for r in rows for k in r})
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                    for k, v in _clean(r).items()})
    return buf.getvalue()


def emit(args, report, rows=None):
    seed = getattr(args, "seed", None)
    report = _stamp(report, seed)
    if rows is not None:
        rows = [_stamp(r, seed) for r in rows]
        report["rows"] = rows
    text = dumps(report)
    if getattr(args, "out_json", None):
        with open(args.out_json, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if rows is not None and getattr(args, "out_csv", None):
        with open(args.out_csv, "w") as fh:
            fh.write(rows_to_csv(rows))
    return EXIT_OK


def load_json(path):
    with open(path) as fh:
        return json.load(fh)


def build_space(args):
    """A space from ``--input`` or from ``--space/--n/--r/--m/--seed``."""
    from .mmspace import FiniteMMSpace
    from .models import (GaussianSpec, ProjectiveSpec, SphereSpec, sample_cpn, sample_gaussian,
                         sample_sphere)

    if getattr(args, "input", None):
        return FiniteMMSpace.from_json(load_json(args.input))
    kind, n, m, seed = args.space, args.n, args.m, args.seed
    if kind is None or n is None:
        raise UsageError("give --input or --space with --n")
    from .lab import _check_matrix

    _check_matrix(m)
    if kind == "sphere":
        r = radius_value(args.r, n)
        return sample_sphere(SphereSpec(n, r, args.metric or "geodesic", m, seed))
    if kind == "gaussian":
        return sample_gaussian(GaussianSpec(n, args.lam, m, seed))
    if kind == "cpn":
        r = radius_value(args.r, 2 * n + 1)
        return sample_cpn(ProjectiveSpec(n, r, args.metric or "fubini_study", m, seed))
    raise UsageError(f"unknown space {kind!r}")


def add_space_args(p, m_default=1000):
    p.add_argument("--input", help="space JSON file")
    p.add_argument("--space", choices=["sphere", "gaussian", "cpn"])
    p.add_argument("--n", type=int)
    p.add_argument("--r", default="1", help="radius: a number or a radius law such as sqrt_n")
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--metric", choices=["geodesic", "chordal", "fubini_study", "chordal_quotient"])
    p.add_argument("--m", type=int, default=m_default)


def add_common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-json", dest="out_json")
    p.add_argument("--out-csv", dest="out_csv")


# -- subcommands -------------------------------------------------------------

def cmd_validate(args):
    from .mmspace import parse_space_json, validate_space

    try:
        report = validate_space(*parse_space_json(load_json(args.path)))
    except (KeyError, TypeError, ValueError) as exc:
        report = [f"malformed space file: {exc}"]
    args.seed = None
    emit(args, {"path": args.path, "valid": not report, "violations": report})
    return EXIT_OK if not report else EXIT_VALIDATION


def cmd_sample(args):
    X = build_space(args)
    text = dumps(X.to_json())
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        return emit(args, {"space": args.space, "n": args.n, "m": X.size, "path": args.out})
    sys.stdout.write(text)
    return EXIT_OK


def cmd_obsdiam(args):
    from .invariants import default_family, obs_diameter
    from .models import normal_obsdiam_limit

    X = build_space(args)
    fam = default_family(X, directions=args.directions, seed=args.seed)
    res = obs_diameter(X, args.kappa, fam, keep_witness=False)
    out = {"estimate": res.value, "witness_tag": res.witness_tag,
           "witness_position": res.witness_position, "kappa": args.kappa,
           "family_size": len(fam), "m": X.size}
    if args.space == "sphere" and args.n:
        lam = radius_value(args.r, args.n) / math.sqrt(args.n)
        out["normal_limit"] = normal_obsdiam_limit(args.kappa, lam)
    return emit(args, out)


def cmd_sep(args):
    from .invariants import separation

    X = build_space(args)
    res = separation(X, parse_floats(args.kappas), method=args.method, seed=args.seed)
    return emit(args, dict(res.to_json(), kappas=parse_floats(args.kappas), m=X.size))


def _load_measure(path):
    from .measurements import MeasureOnRN

    obj = load_json(path)
    if "points" in obj:
        return MeasureOnRN.from_json(obj)
    if "values" in obj:
        return MeasureOnRN(np.asarray(obj["values"], float)[:, None], obj["weights"])
    raise UsageError(f"{path}: expected a measure with 'points' (or 'values') and 'weights'")


def cmd_prokhorov(args):
    from .distances import prokhorov

    mu, nu = _load_measure(args.mu), _load_measure(args.nu)
    p = np.inf if args.norm == "inf" else 2
    return emit(args, {"d_P": prokhorov(mu, nu, p=p), "norm": args.norm})


def cmd_me(args):
    from .distances import me_distance

    obj = load_json(args.path)
    v, t = me_distance(obj["f"], obj["g"], obj.get("weights"), optimize_shift=args.shift,
                       return_shift=True)
    return emit(args, {"me": v, "shift": t, "optimize_shift": args.shift})


def cmd_box(args):
    from .distances import box_exact_tiny, box_upper
    from .mmspace import FiniteMMSpace

    X = FiniteMMSpace.from_json(load_json(args.x))
    Y = FiniteMMSpace.from_json(load_json(args.y))
    res = box_upper(X, Y, restarts=args.restarts, seed=args.seed)
    out = {"upper": res.value, "threshold": res.threshold, "kept_mass": res.kept_mass,
           "coupling": res.coupling.triplets() if res.coupling is not None else None}
    if X.size * Y.size <= 25:
        out["exact"] = box_exact_tiny(X, Y)
    return emit(args, out)


def cmd_measure(args):
    from .measurements import measurement_set

    X = build_space(args)
    R = None if args.R is None else float(args.R)
    ms = measurement_set(X, args.N, R, args.budget, args.seed)
    return emit(args, ms.to_json())


def _pyramid(args, which):
    from .lab import gaussian_chain
    from .models import GaussianSpec, SphereSpec, sample_gaussian, sample_sphere
    from .mmspace import FiniteMMSpace

    spec = getattr(args, which)
    kind, _, rest = spec.partition(":")
    kv = dict(item.split("=", 1) for item in rest.split(",") if item)
    m = int(kv.get("m", args.m))
    seed = int(kv.get("seed", args.seed))
    if kind == "file":
        return FiniteMMSpace.from_json(load_json(kv["path"]))
    if kind == "sphere":
        n = int(kv["n"])
        r = radius_value(kv.get("r", "sqrt_n"), n)
        return sample_sphere(SphereSpec(n, r, kv.get("metric", "geodesic"), m, seed))
    if kind == "gaussian":
        return sample_gaussian(GaussianSpec(int(kv["n"]), float(kv.get("lam", 1.0)), m, seed))
    if kind == "gaussian-chain":
        return gaussian_chain(int(kv.get("k", 4)), float(kv.get("lam", 1.0)), m, seed)
    raise UsageError(f"unknown pyramid spec {spec!r}; use sphere:n=..,r=.. | gaussian:n=.. | "
                     "gaussian-chain:k=..,lam=.. | file:path=..")


def cmd_pyramid_rho(args):
    from .measurements import pyramid_rho

    res = pyramid_rho(_pyramid(args, "x"), _pyramid(args, "y"), args.K, args.budget, args.seed)
    return emit(args, dict(res.to_json(), x=args.x, y=args.y, K=args.K, budget=args.budget))


def cmd_mb(args):
    from .lab import mb_convergence

    rows = mb_convergence(parse_grid(args.grid), args.k, args.lam, args.m, args.seed, args.variant)
    return emit(args, {"variant": args.variant}, rows)


def cmd_normal_law(args):
    from .lab import normal_law_rearrangement, sphere_distance_pushforward
    from .models import SphereSpec

    r = radius_value(args.r, args.n)
    p = sphere_distance_pushforward(args.n, r, args.m, args.seed)
    res = normal_law_rearrangement(p)
    rows = [{"x": x, "alpha": a} for x, a in zip(res.grid, res.alpha)]
    return emit(args, {"lipschitz_violation": res.lipschitz_violation, "monotone": res.monotone,
                       "n": args.n, "r": r, "m": args.m}, rows)


def cmd_trichotomy(args):
    from .lab import trichotomy

    thresholds = getattr(args, "thresholds", None)
    rep = trichotomy(args.radius_law, parse_grid(args.grid), args.family, args.kappa, args.m,
                     args.seed, args.budget, thresholds=thresholds)
    out = rep.to_json()
    rows = out.pop("rows")
    out["radius_law"] = args.radius_law
    return emit(args, out, rows)


def cmd_nonconc(args):
    from .lab import nonconcentration_constant, nonconcentration_root

    rows = nonconcentration_constant(parse_grid(args.grid), args.m, args.seed, args.i, args.j)
    return emit(args, {"root": nonconcentration_root()}, rows)


def cmd_cpn_bounds(args):
    from .lab import cpn_obsdiam_bounds

    r = radius_value(args.r, 2 * args.n + 1)
    res = cpn_obsdiam_bounds(args.n, r, args.kappa, args.m, args.seed)
    return emit(args, dict(res.to_json(), inside=res.inside(args.tol), tol=args.tol))


def cmd_run(args):
    import jsonschema

    try:
        manifest = load_json(args.manifest)
    except json.JSONDecodeError as exc:
        sys.stderr.write(f"{args.manifest}:{exc.lineno}:{exc.colno}: {exc.msg}\n")
        return EXIT_VALIDATION
    validator = jsonschema.Draft7Validator(MANIFEST_SCHEMA)
    errors = sorted(validator.iter_errors(manifest), key=lambda e: list(e.path))
    if errors:
        for e in errors:
            where = "/".join(str(p) for p in e.path) or "<root>"
            sys.stderr.write(f"{args.manifest}: field {where}: {e.message}\n")
        return EXIT_VALIDATION
    argv = [manifest["command"]]
    params = dict(manifest.get("params", {}))
    positional = params.pop("_positional", [])
    argv += [str(p) for p in (positional if isinstance(positional, list) else [positional])]
    if "seed" in manifest:
        params["seed"] = manifest["seed"]
    for key, val in params.items():
        flag = "--" + key.replace("_", "-")
        if isinstance(val, bool):
            if val:
                argv.append(flag)
            continue
        if isinstance(val, list):
            val = ",".join(str(v) for v in val)
        argv += [flag, str(val)]
    outputs = manifest.get("outputs", {})
    if "json" in outputs:
        argv += ["--out-json", outputs["json"]]
    if "csv" in outputs:
        argv += ["--out-csv", outputs["csv"]]
    sub = build_parser().parse_args(argv)
    if manifest.get("thresholds"):
        sub.thresholds = manifest["thresholds"]
    return sub.func(sub)


# -- parser ------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="mmlimits", description=__doc__)
    p.add_argument("--version", action="version", version=f"mmlimits {__version__}")
    p.add_argument("--threads", type=int, default=None, help="cap on BLAS threads")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="check a space JSON file")
    s.add_argument("path")
    s.add_argument("--out-json", dest="out_json")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("sample", help="sample a model space to JSON")
    add_space_args(s)
    add_common(s)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("obsdiam", help="observable diameter lower bound")
    add_space_args(s, 5000)
    add_common(s)
    s.add_argument("--kappa", type=float, default=0.1)
    s.add_argument("--directions", type=int, default=64)
    s.set_defaults(func=cmd_obsdiam)

    s = sub.add_parser("sep", help="separation distance")
    add_space_args(s)
    add_common(s)
    s.add_argument("--kappas", default="0.1,0.1")
    s.add_argument("--method", choices=["auto", "exact", "heuristic"], default="auto")
    s.set_defaults(func=cmd_sep)

    s = sub.add_parser("prokhorov", help="Prokhorov distance of two measures in R^N")
    s.add_argument("mu")
    s.add_argument("nu")
    s.add_argument("--norm", choices=["inf", "2"], default="inf")
    add_common(s)
    s.set_defaults(func=cmd_prokhorov)

    s = sub.add_parser("me", help="me distance of two functions")
    s.add_argument("path", help="JSON with f, g and optional weights")
    s.add_argument("--shift", action="store_true", help="minimize over constant shifts")
    add_common(s)
    s.set_defaults(func=cmd_me)

    s = sub.add_parser("box", help="box distance upper bound (exact when tiny)")
    s.add_argument("x")
    s.add_argument("y")
    s.add_argument("--restarts", type=int, default=32)
    add_common(s)
    s.set_defaults(func=cmd_box)

    s = sub.add_parser("measure", help="measurement set of a space")
    add_space_args(s)
    add_common(s)
    s.add_argument("--N", type=int, default=1)
    s.add_argument("--R", type=float)
    s.add_argument("--budget", type=int, default=8)
    s.set_defaults(func=cmd_measure)

    s = sub.add_parser("pyramid-rho", help="truncated pyramid metric estimate")
    s.add_argument("--x", required=True, help="e.g. sphere:n=30,r=sqrt_n")
    s.add_argument("--y", required=True, help="e.g. gaussian-chain:k=4,lam=1")
    s.add_argument("--m", type=int, default=1000)
    s.add_argument("--K", type=int, default=6)
    s.add_argument("--budget", type=int, default=8)
    add_common(s)
    s.set_defaults(func=cmd_pyramid_rho)

    s = sub.add_parser("mb", help="Maxwell-Boltzmann convergence table")
    s.add_argument("--grid", default="25,50,100,200")
    s.add_argument("--k", type=int, default=1)
    s.add_argument("--lam", type=float, default=1.0)
    s.add_argument("--m", type=int, default=20000)
    s.add_argument("--variant", choices=["sphere", "cpn", "cpn_sphere"], default="sphere")
    add_common(s)
    s.set_defaults(func=cmd_mb)

    s = sub.add_parser("normal-law", help="monotone rearrangement of a distance pushforward")
    s.add_argument("--n", type=int, default=200)
    s.add_argument("--r", default="sqrt_n")
    s.add_argument("--m", type=int, default=200000)
    add_common(s)
    s.set_defaults(func=cmd_normal_law)

    s = sub.add_parser("trichotomy", help="classify a radius law")
    s.add_argument("--family", choices=["sphere", "cpn"], default="sphere")
    s.add_argument("--radius-law", dest="radius_law", required=True)
    s.add_argument("--grid", default="25:200")
    s.add_argument("--kappa", type=float, default=0.1)
    s.add_argument("--m", type=int, default=1000)
    s.add_argument("--budget", type=int, default=8)
    add_common(s)
    s.set_defaults(func=cmd_trichotomy)

    s = sub.add_parser("nonconc", help="me distance between Gaussian coordinates")
    s.add_argument("--grid", default="2,10,50")
    s.add_argument("--m", type=int, default=100000)
    s.add_argument("--i", type=int, default=0)
    s.add_argument("--j", type=int, default=1)
    add_common(s)
    s.set_defaults(func=cmd_nonconc)

    s = sub.add_parser("cpn-bounds", help="ObsDiam of CP^n against its limit bracket")
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--r", default="sqrt_2n_plus_1")
    s.add_argument("--kappa", type=float, default=0.1)
    s.add_argument("--m", type=int, default=5000)
    s.add_argument("--tol", type=float, default=0.15)
    add_common(s)
    s.set_defaults(func=cmd_cpn_bounds)

    s = sub.add_parser("run", help="execute a JSON experiment manifest")
    s.add_argument("manifest")
    s.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    from .lab import ResourceError
    from .mmspace import SpaceError

    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.threads:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=args.threads):
                return args.func(args)
        return args.func(args)
    except (ResourceError, MemoryError) as exc:
        sys.stderr.write(f"resource limit: {exc}; reduce m\n")
        return EXIT_RESOURCE
    except (SpaceError, UsageError, ValueError, KeyError, FileNotFoundError) as exc:
        sys.stderr.write(f"validation error: {exc}\n")
        return EXIT_VALIDATION
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
