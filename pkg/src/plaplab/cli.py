"""Command-line entry point: ``plaplab <subcommand> ...``.

Exit codes: 0 when every report passes, 1 when any report fails or a
solver gives up, 2 on a configuration or parameter-range error. Artifacts
are assembled in memory and written only after all compute has finished.
"""

import argparse
import inspect
import json
import math
import sys

import numpy as np

from . import constants as C
from . import io as pio
from . import suites
from . import verify as V
from .constants import ParameterRangeError, ProblemParams
from .elliptic import ConvergenceError, EllipticProblem, boundary_preset, solve as solve_elliptic
from .parabolic import ParabolicProblem, StabilityError, exact_sharpness_solution, solve as solve_parabolic
from .tensor_core import DEFAULT_SEED, check_inequality

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

REPORT_COLUMNS = ["name", "n", "p", "gamma", "eps", "h", "dt", "lhs", "rhs_raw", "ratio", "pass",
                  "criterion", "estimate"]

#: plain-language statement of each estimate, emitted in the CSV ``estimate`` column
ESTIMATES = {
    "divergence_identity": "int (|D2u|^2 - (Lap u)^2) phi^2 = -int (D2u Du - Lap u Du) . D(phi^2)",
    "gradient_power_w12": "int_Br |D(w^((p-gamma)/4) Du)|^2 <= C r^-2 int_B2r w^((p-gamma+2)/2), w = |Du|^2+eps",
    "weighted_energy": "int w^((p-gamma)/2) (|D2u Du|^2/w + (Lap u)^2) phi^2 <= C int w^((p-gamma+2)/2) |Dphi|^2",
    "hessian_sign_bound": "pointwise |D2u|^2 - (Lap u)^2 >= |D2u|^2 / K(n,p)",
    "planar_quasiregularity": "pointwise |D2u|^2 <= -((p-1)^2+1)/(p-1) det D2u (n=2)",
    "normalized_parabolic_w22": "int_Qr (u_t^2 + |D2u|^2) <= C r^-2 int_Q2r |Du|^2",
    "parabolic_plap_time_l2": "int_Qr u_t^2 <= C r^-2 int_Q2r (|Du|^p + |Du|^(2p-2))",
    "parabolic_plap_hessian_l2": "int_Qr |D2u|^2 <= C r^-2 int_Q2r (|Du|^2 + |Du|^(4-p))",
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Config handling


def load_config(path, allowed, required=()):
    """Read a JSON config; reject unknown and missing keys, listing all of them."""
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    problems = []
    unknown = sorted(set(cfg) - set(allowed) - {"schema_version"})
    if unknown:
        problems.append(f"unknown keys: {', '.join(unknown)}")
    missing = sorted(k for k in required if k not in cfg)
    if missing:
        problems.append(f"missing keys: {', '.join(missing)}")
    if cfg.get("schema_version") != pio.SCHEMA_VERSION:
        problems.append(f"schema_version must be {pio.SCHEMA_VERSION}, got {cfg.get('schema_version')!r}")
    if problems:
        raise ConfigError("; ".join(problems))
    cfg.pop("schema_version")
    return cfg


def _grid(cfg):
    n = int(cfg["n"])
    if "shape" in cfg:
        shape = tuple(int(s) for s in cfg["shape"])
    elif "N" in cfg:
        shape = (int(cfg["N"]) + 1,) * n
    else:
        raise ConfigError("need 'shape' or 'N'")
    if len(shape) != n:
        raise ConfigError(f"shape {list(shape)} does not have n={n} entries")
    h = float(cfg.get("h", 1.0 / (shape[0] - 1)))
    origin = tuple(cfg["origin"]) if "origin" in cfg else None
    return shape, h, origin


def _preset(entry):
    """``"name"`` or ``{"preset": name, **kw}`` -> (name, kw)."""
    if isinstance(entry, str):
        return entry, {}
    if isinstance(entry, dict) and "preset" in entry:
        kw = dict(entry)
        return kw.pop("preset"), kw
    raise ConfigError(f"preset must be a name or an object with 'preset', got {entry!r}")


def _json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


# ---------------------------------------------------------------------------
# Subcommands


def cmd_check_inequality(args):
    results = []
    for n in args.n:
        if n < 2:
            raise ParameterRangeError(f"n must be >= 2, got {n}", "n >= 2")
        results.append(check_inequality(n, args.samples, args.seed)._asdict())
    ok = all(r["violations"] == 0 for r in results)
    text = _json({"seed": args.seed, "samples": args.samples, "results": results, "passed": ok})
    sys.stdout.write(text)
    if args.out:
        pio.write_artifacts(args.out, {"inequality.json": text})
    return EXIT_OK if ok else EXIT_FAIL


def cmd_constants(args):
    if args.n < 2:
        raise ParameterRangeError(f"n must be >= 2, got {args.n}", "n >= 2")
    ProblemParams(args.n, args.p)
    out = C.summary(args.n, args.p, args.gamma)
    sys.stdout.write(_json(out))
    return EXIT_OK


ELLIPTIC_KEYS = {"n", "p", "eps", "shape", "N", "h", "origin", "boundary", "theta", "picard_tol",
                 "max_iter", "cg_tol", "cg_max_iter", "residual_tol"}
KNOBS = ("theta", "picard_tol", "max_iter", "cg_tol", "cg_max_iter", "residual_tol")


def cmd_solve_elliptic(args):
    cfg = load_config(args.config, ELLIPTIC_KEYS, ("n", "p", "boundary"))
    params = ProblemParams(int(cfg["n"]), float(cfg["p"]), float(cfg.get("eps", 1e-6)))
    shape, h, origin = _grid(cfg)
    name, kw = _preset(cfg["boundary"])
    try:
        g = boundary_preset(name, params.n, params.p, **kw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    knobs = {k: cfg[k] for k in KNOBS if k in cfg}
    try:
        problem = EllipticProblem(params, shape, h, g, origin, **knobs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    try:
        result = solve_elliptic(problem)
        ok, message, rows = True, "converged", result.log.as_rows()
    except ConvergenceError as exc:
        result, ok, message, rows = None, False, str(exc), list(exc.history)
    summary = {"config": cfg, "converged": ok, "message": message, "iterations": len(rows)}
    artifacts = {"convergence.csv": pio.csv_text(rows, ["iteration", "update", "residual", "cg_iterations"])}
    if result is not None:
        u = result.field
        summary["max_abs"] = float(np.abs(u.values).max())
        if name in ("radial", "affine"):
            summary["max_error_vs_preset"] = float(np.abs(u.values - g(*u.coords())).max())
        artifacts["field.plf"] = pio.field_to_bytes(u)
    artifacts["summary.json"] = _json(summary)
    pio.write_artifacts(args.out_dir, artifacts)
    sys.stdout.write(_json({k: v for k, v in summary.items() if k != "config"}))
    return EXIT_OK if ok else EXIT_FAIL


PARABOLIC_KEYS = {"n", "p", "eps", "kind", "shape", "N", "h", "origin", "T", "dt", "max_layers",
                  "initial", "boundary"}


def _initial_preset(name, kw, n, p):
    if name == "sine":
        return lambda *X: np.prod([np.sin(np.pi * x) for x in X], axis=0)
    if name == "sharpness":
        w = exact_sharpness_solution(p)
        return lambda *X: w(0.0, *X)
    return boundary_preset(name, n, p, **kw)


def cmd_solve_parabolic(args):
    cfg = load_config(args.config, PARABOLIC_KEYS, ("n", "p", "kind", "T", "initial"))
    params = ProblemParams(int(cfg["n"]), float(cfg["p"]), float(cfg.get("eps", 1e-4)))
    shape, h, origin = _grid(cfg)
    name, kw = _preset(cfg["initial"])
    try:
        init = _initial_preset(name, kw, params.n, params.p)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    lateral_name = cfg.get("boundary", "frozen")
    if lateral_name == "frozen":
        lateral = None
    elif lateral_name == "sharpness":
        lateral = exact_sharpness_solution(params.p)
    else:
        raise ConfigError(f"boundary must be 'frozen' or 'sharpness', got {lateral_name!r}")
    try:
        problem = ParabolicProblem(params, cfg["kind"], shape, h, float(cfg["T"]), init, lateral, origin,
                                   cfg.get("dt"), int(cfg.get("max_layers", 101)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    artifacts = {}
    try:
        result = solve_parabolic(problem)
    except StabilityError as exc:
        summary = {"stable": False, "message": str(exc), "step": exc.step, "time": exc.time}
        pio.write_artifacts(args.out_dir, {"summary.json": _json({"config": cfg, **summary})})
        sys.stdout.write(_json(summary))
        return EXIT_FAIL
    u = result.field
    rows = [r._asdict() for r in result.log]
    artifacts["steps.csv"] = pio.csv_text(rows, ["step", "time", "sup_norm", "energy"])
    artifacts["field.plf"] = pio.field_to_bytes(u)
    summary = {"stable": True, "steps": len(rows) - 1, "dt": result.log[1].time if len(rows) > 1 else None,
               "stored_layers": u.steps + 1, "final_sup_norm": rows[-1]["sup_norm"]}
    artifacts["summary.json"] = _json({"config": cfg, **summary})
    pio.write_artifacts(args.out_dir, artifacts)
    sys.stdout.write(_json(summary))
    return EXIT_OK


def _report_rows(reports):
    rows = []
    for r in reports:
        row = r.row()
        row["criterion"] = r.criterion
        row["estimate"] = ESTIMATES.get(r.name, "")
        rows.append(row)
    return rows


def cmd_verify(args):
    if args.suite != "all" and args.suite not in suites.SUITES:
        raise ConfigError(f"unknown suite {args.suite!r}; choose from {sorted(suites.SUITES)} or 'all'")
    options = {}
    if args.config:
        if args.suite == "all":
            raise ConfigError("suite 'all' takes no config")
        allowed = set(inspect.signature(suites.SUITES[args.suite]).parameters)
        options = load_config(args.config, allowed)
    result = suites.run_suite(args.suite, **options)
    rows = _report_rows(result.reports)
    summary = {"suite": result.name, "passed": result.passed, "reports": len(rows),
               "failed_reports": [r["name"] for r in rows if not r["pass"]], "details": result.details,
               "options": options}
    text = _json(summary)
    pio.write_artifacts(args.out_dir, {"reports.csv": pio.csv_text(rows, REPORT_COLUMNS), "summary.json": text})
    sys.stdout.write(text)
    return EXIT_OK if result.passed else EXIT_FAIL


def cmd_sharpness(args):
    scan = V.sharpness_scan(args.p, args.levels, args.h0)
    rows = scan.rows()
    for k, row in enumerate(rows):
        row["increment"] = None if k == 0 else row["hessian_sq_integral"] - rows[k - 1]["hessian_sq_integral"]
        row["monotone_increasing"] = k == 0 or row["increment"] > 0
    summary = {"p": scan.p, "classification": scan.classification,
               "divergent": scan.classification in ("divergent", "log-divergent"),
               "monotone_increasing": scan.notes["monotone_increasing"],
               "predicted_exponent": scan.predicted_exponent, "fitted_rate": scan.fitted_rate,
               "log_slope": scan.log_slope, "passed": scan.passed, "rows": rows}
    text = _json(summary)
    if args.out_dir:
        cols = ["level", "h", "hessian_sq_integral", "increment", "monotone_increasing"]
        pio.write_artifacts(args.out_dir, {"sharpness.csv": pio.csv_text(rows, cols), "sharpness.json": text})
    sys.stdout.write(text)
    return EXIT_OK if scan.passed else EXIT_FAIL


def _point(text):
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"point must be x1,x2,x3, got {text!r}") from None
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"point must have 3 coordinates, got {text!r}")
    return vals


def cmd_sign_probe(args):
    if any(min(pt) <= 0 for pt in args.points):
        raise ParameterRangeError("probe points must lie in the open positive octant", "x1, x2, x3 > 0")
    q = V.sign_change_probe(args.points, args.coefficient)
    out = {"coefficient": args.coefficient,
           "points": [{"x": list(pt), "Q": float(v), "sign": int(np.sign(v))} for pt, v in zip(args.points, q)]}
    if args.h:
        for item, pt in zip(out["points"], args.points):
            item["Q_discrete"] = float(V.sign_change_discrete(pt, args.h))
    sys.stdout.write(_json(out))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser():
    ap = argparse.ArgumentParser(prog="plaplab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("check-inequality", help="sample random jets against the pointwise Hessian inequality")
    s.add_argument("--n", type=int, nargs="+", required=True, help="dimension(s), each >= 2")
    s.add_argument("--samples", type=int, default=100_000, help="jets per dimension (default 100000)")
    s.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"RNG seed (default {DEFAULT_SEED})")
    s.add_argument("--out", help="directory for inequality.json")
    s.set_defaults(func=cmd_check_inequality)

    s = sub.add_parser("constants", help="print constants and admissibility flags as JSON")
    s.add_argument("--n", type=int, required=True, help="dimension >= 2")
    s.add_argument("--p", type=float, required=True, help="exponent p > 1")
    s.add_argument("--gamma", type=float, help="weight exponent; adds c(n,p,gamma) and its admissibility")
    s.set_defaults(func=cmd_constants)

    s = sub.add_parser("solve-elliptic", help="solve the regularized p-Laplace Dirichlet problem")
    s.add_argument("--config", required=True, help="JSON config (schema_version 1)")
    s.add_argument("--out-dir", default=".", help="artifact directory (default: cwd)")
    s.set_defaults(func=cmd_solve_elliptic)

    s = sub.add_parser("solve-parabolic", help="run an explicit parabolic solve")
    s.add_argument("--config", required=True, help="JSON config (schema_version 1)")
    s.add_argument("--out-dir", default=".", help="artifact directory (default: cwd)")
    s.set_defaults(func=cmd_solve_parabolic)

    s = sub.add_parser("verify", help="run a named verification suite")
    s.add_argument("--suite", required=True, help=f"one of {', '.join(suites.SUITES)}, or all")
    s.add_argument("--config", help="JSON config overriding suite options (schema_version 1)")
    s.add_argument("--out-dir", default=".", help="artifact directory (default: cwd)")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("sharpness", help="dyadic scan of the Hessian square integral of the sharpness solution")
    s.add_argument("--p", type=float, required=True, help="exponent p > 1")
    s.add_argument("--levels", type=int, default=5, help="number of dyadic levels, >= 3 (default 5)")
    s.add_argument("--h0", type=float, default=1 / 16, help="coarsest spacing (default 1/16)")
    s.add_argument("--out-dir", help="directory for sharpness.csv and sharpness.json")
    s.set_defaults(func=cmd_sharpness)

    s = sub.add_parser("sign-probe", help="evaluate |D2w|^2 - (Lap w)^2 for the 3D infinity-harmonic w")
    s.add_argument("--points", type=_point, nargs="+", required=True, help="points x1,x2,x3 (positive)")
    s.add_argument("--coefficient", type=float, default=V.SIGN_CHANGE_COEFFICIENT,
                   help="probe coefficient (default 2^(1/3))")
    s.add_argument("--h", type=float, help="also report the finite-difference value at spacing h")
    s.set_defaults(func=cmd_sign_probe)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return args.func(args)
    except ParameterRangeError as exc:
        print(f"error: {exc} (valid range: {exc.range_text})", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, StabilityError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
