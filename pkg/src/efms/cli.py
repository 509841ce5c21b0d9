"""Command-line front end: ``efms <subcommand> --spec <file-or-name> ...``.

Exit codes: 0 success, 1 other error, 2 file not found, 3 spec parse error,
4 a requested check exceeded its tolerance.  Errors are written to stderr
as a JSON object.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from fractions import Fraction

import numpy as np

from . import __version__
from .ef_fitting import classical_limit, solve_ef_coefficients
from .errors import EFMSError, InvalidMethodError, ShapeError, SpecParseError
from .integrator import amplitude_drift, integrate
from .method_core import load_method_spec, order_and_error_constant, validate
from .phase_analysis import (
    fit_phaselag,
    periodicity_interval,
    plte_constant_closed_form,
    stability_region_scan,
    theorem2_check,
)
from .problems import CATALOG, get_problem, list_problems

EXIT_OK, EXIT_ERROR, EXIT_NOT_FOUND, EXIT_PARSE, EXIT_TOLERANCE = 0, 1, 2, 3, 4


class ToleranceViolation(Exception):
    def __init__(self, message, payload):
        super().__init__(message)
        self.payload = payload


def env_tol(name: str, default: float) -> float:
    raw = os.environ.get(f"EFMS_TOL_{name}")
    if raw is None:
        return default
    value = float(raw)
    if not value > 0:
        raise ValueError(f"EFMS_TOL_{name} must be positive, got {raw}")
    return value


def _bounded(kind, lo=None, hi=None, lo_open=False):
    def parse(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid {kind.__name__} value: {text!r}") from None
        if isinstance(v, float) and not math.isfinite(v):
            raise argparse.ArgumentTypeError(f"{text!r} is not finite")
        if lo is not None and (v < lo or (lo_open and v == lo)):
            raise argparse.ArgumentTypeError(f"{v} must be {'>' if lo_open else '>='} {lo}")
        if hi is not None and v > hi:
            raise argparse.ArgumentTypeError(f"{v} must be <= {hi}")
        return v

    return parse


nonneg = _bounded(float, 0.0)
positive = _bounded(float, 0.0, lo_open=True)
unit = _bounded(float, 0.0, 1.0)
count = _bounded(int, 1)


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)) or v is None:
        return "" if v is None else str(v)
    return "%.17g" % float(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, Fraction)):
        return float(obj)
    return obj


def dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2) + "\n"


def dump_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _load(ref):
    try:
        return load_method_spec(ref)
    except (InvalidMethodError, ShapeError) as exc:
        raise SpecParseError(str(exc)) from exc


def cmd_coeffs(args):
    spec = _load(args.spec)
    cs = solve_ef_coefficients(spec, args.theta)
    d = {"label": spec.label, **cs.to_dict()}
    if args.format == "csv":
        return dump_csv(["j", "a", "b"], [(j, a, b) for j, (a, b) in enumerate(zip(cs.a, cs.b))])
    return dump_json(d)


def cmd_validate(args):
    spec = _load(args.spec)
    cs = solve_ef_coefficients(spec, args.theta)
    rep = validate(cs)
    d = {"label": spec.label, "theta": args.theta, **rep.to_dict()}
    if args.format == "json":
        out = dump_json(d)
    else:
        out = dump_csv(["check", "value"], [(k, v) for k, v in d.items() if isinstance(v, bool)])
    if not rep.ok:
        raise ToleranceViolation("method fails validation", out)
    return out


def cmd_order(args):
    spec = _load(args.spec)
    if args.theta == 0 or spec.is_classical:
        cs = classical_limit(spec, exact=True)
    else:
        cs = solve_ef_coefficients(spec, args.theta)
    rep = order_and_error_constant(cs, zero_threshold=args.zero_threshold)
    d = {"label": spec.label, "theta": args.theta, **rep.to_dict()}
    if isinstance(rep.error_constant, Fraction):
        d["C_exact"] = str(rep.error_constant)
    if args.format == "csv":
        return dump_csv(["q", "C_q"], rep.cq_sequence)
    return dump_json(d)


def _phaselag_row(spec, r, tol_zero):
    fit = fit_phaselag(spec, r)
    closed = plte_constant_closed_form(spec)(r)
    if closed == 0 or fit.exact_zero:
        dev = abs(fit.c - closed)
        ok = dev <= tol_zero
    else:
        dev = abs(fit.c / closed - 1.0)
        ok = None
    return fit, closed, dev, ok


def cmd_phaselag(args):
    spec = _load(args.spec)
    tol = env_tol("PHASELAG", 0.01)
    tol_zero = env_tol("ZERO", 1e-9)
    fit, closed, dev, ok = _phaselag_row(spec, args.r, tol_zero)
    if ok is None:
        ok = dev <= tol
    if args.format == "csv":
        out = dump_csv(["r", "q", "c_fit", "c_closed", "deviation"], [(args.r, fit.q, fit.c, closed, dev)])
    else:
        out = dump_json({"label": spec.label, **fit.to_dict(), "c_closed": closed, "deviation": dev,
                         "tolerance": tol, "points": fit.fit_points})
    if not ok:
        raise ToleranceViolation(f"phase-lag constant deviates by {dev:.3g}", out)
    return out


def cmd_stability(args):
    spec = _load(args.spec)
    nu = np.linspace(args.nu_max / args.n, args.nu_max, args.n)
    second = np.linspace(0.0, args.r_max if args.axis == "r" else args.theta_max, args.n)
    grid = stability_region_scan(spec, nu, second, axis=args.axis, threads=args.threads)
    if args.format == "csv":
        return dump_csv(["nu", "theta", "periodic"], grid.to_rows())
    return dump_json({
        "label": spec.label,
        "axis": args.axis,
        "n": args.n,
        "periodic_fraction": float(grid.periodic.mean()),
        "excluded_cells": grid.excluded,
        "classical_interval_nu2": periodicity_interval(spec, 0.0),
    })


def cmd_integrate(args):
    spec = _load(args.spec)
    entry = get_problem(args.problem, omega=args.omega)
    traj = integrate(spec, entry.problem, args.h, args.steps, k=args.k)
    err = traj.errors()
    summary = {
        "label": spec.label,
        "problem": entry.name,
        "h": args.h,
        "steps": args.steps,
        "theta": float(traj.coefficients.theta),
        "max_error": traj.max_error(),
        "max_residual": traj.max_residual,
        "f_evals": traj.f_evals,
        "max_iterations": int(traj.implicit_iters.max()),
        "mean_iterations": float(traj.implicit_iters[spec.J:].mean()),
    }
    if entry.name == "harmonic":
        summary["amplitude_drift"] = amplitude_drift(traj, entry.dominant_frequency)
    if args.format == "csv":
        d = entry.problem.dim
        header = ["x"] + [f"y{i}" for i in range(d)]
        if err is not None:
            header += [f"err{i}" for i in range(d)]
        rows = []
        for n, x in enumerate(traj.xs):
            row = [x, *traj.ys[n]]
            if err is not None:
                row += list(err[n])
            rows.append(row)
        return dump_csv(header, rows)
    return dump_json(summary)


def cmd_verify_theorem2(args):
    spec = _load(args.spec)
    tol = env_tol("THEOREM2", 0.02)
    rep = theorem2_check(spec, args.r_list, threads=args.threads)
    if args.format == "csv":
        out = dump_csv(["r", "q", "c_fit", "c_closed", "deviation"],
                       [(row.r, row.q, row.c_fit, row.c_closed, row.deviation) for row in rep.rows])
    else:
        out = dump_json({**rep.to_dict(), "tolerance": tol, "passed": rep.max_deviation < tol})
    if not rep.max_deviation < tol:
        raise ToleranceViolation(f"max deviation {rep.max_deviation:.3g} exceeds {tol:g}", out)
    return out


def cmd_problems(args):
    return dump_json(list_problems())


def _r_list(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad r list {text!r}") from None
    if not vals or any(not 0.0 <= v <= 0.95 for v in vals):
        raise argparse.ArgumentTypeError("r values must lie in [0, 0.95]")
    return tuple(vals)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="efms", description="Exponentially-fitted symmetric multistep methods.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "csv"), default="json", help="output format (default: json)")
    common.add_argument("--output", "-o", default=None, help="write to this file instead of stdout")

    withspec = argparse.ArgumentParser(add_help=False, parents=[common])
    withspec.add_argument("--spec", required=True, help="method definition file or bundled name (e.g. numerov)")

    threads = argparse.ArgumentParser(add_help=False)
    threads.add_argument("--threads", type=count, default=None, help="worker threads (default: all cores)")

    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("coeffs", parents=[withspec], help="coefficients a_j, b_j at theta")
    p.add_argument("--theta", type=nonneg, default=0.0, help="theta = k h (default: 0)")
    p.set_defaults(func=cmd_coeffs)

    p = sub.add_parser("validate", parents=[withspec], help="symmetry, consistency, zero-stability checks")
    p.add_argument("--theta", type=nonneg, default=0.0, help="theta = k h (default: 0)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("order", parents=[withspec], help="order p and error constant C_{p+2}")
    p.add_argument("--theta", type=nonneg, default=0.0, help="theta = k h (default: 0)")
    p.add_argument("--zero-threshold", type=positive, default=1e-9,
                   help="relative threshold below which C_q counts as zero (default: 1e-9)")
    p.set_defaults(func=cmd_order)

    p = sub.add_parser("phaselag", parents=[withspec],
                       help="fitted phase-lag order and constant at r = theta/nu vs closed form "
                            "(tolerance EFMS_TOL_PHASELAG, default 0.01)")
    p.add_argument("--r", type=unit, default=0.0, help="frequency ratio r in [0, 1] (default: 0)")
    p.set_defaults(func=cmd_phaselag)

    p = sub.add_parser("stability", parents=[withspec, threads], help="periodicity grid over (nu, theta)")
    p.add_argument("--nu-max", type=positive, default=3.0, help="largest nu (default: 3)")
    p.add_argument("--r-max", type=unit, default=1.0, help="largest r when --axis r (default: 1)")
    p.add_argument("--theta-max", type=positive, default=3.0, help="largest theta when --axis theta (default: 3)")
    p.add_argument("--axis", choices=("r", "theta"), default="r", help="second grid axis (default: r)")
    p.add_argument("--n", type=_bounded(int, 2, 2000), default=200, help="points per axis (default: 200)")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("integrate", parents=[withspec], help="integrate a built-in problem")
    p.add_argument("--problem", choices=sorted(CATALOG), required=True, help="problem name")
    p.add_argument("--h", type=positive, required=True, help="step size")
    p.add_argument("--steps", type=count, required=True, help="number of steps (at least J)")
    p.add_argument("--k", type=nonneg, default=None, help="fitting frequency; theta = k h (default: classical limit)")
    p.add_argument("--omega", type=positive, default=None, help="frequency of the harmonic problem (default: 1)")
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("verify-theorem2", parents=[withspec, threads],
                       help="check c(r) = c(0) (1 - r^2)^(P+1) (tolerance EFMS_TOL_THEOREM2, default 0.02)")
    p.add_argument("--r-list", type=_r_list, default=(0.3, 0.6, 0.9),
                   help="comma-separated r values in [0, 0.95] (default: 0.3,0.6,0.9)")
    p.set_defaults(func=cmd_verify_theorem2)

    p = sub.add_parser("problems", parents=[common], help="built-in test problems")
    p.add_argument("--list", action="store_true", required=True, help="list the catalog as JSON")
    p.set_defaults(func=cmd_problems)
    return parser


def _emit(text, path):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _error(code, kind, message):
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _emit(args.func(args), args.output)
    except ToleranceViolation as exc:
        _emit(exc.payload, args.output)
        return _error(EXIT_TOLERANCE, "tolerance", str(exc))
    except FileNotFoundError as exc:
        return _error(EXIT_NOT_FOUND, "file-not-found", str(exc))
    except SpecParseError as exc:
        return _error(EXIT_PARSE, "parse", str(exc))
    except (EFMSError, ValueError, KeyError, ArithmeticError) as exc:
        return _error(EXIT_ERROR, type(exc).__name__, str(exc))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
