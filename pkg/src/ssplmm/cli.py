"""Command-line front end.

Exit codes: 0 ok, 2 usage or malformed input, 3 infeasible, 4 bracket cap,
5 order conditions fail, 6 solver failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import methods as mt
from .document import DocumentError, MethodDocument
from .integrate import (NewtonError, Starting, default_u0_grid, integrate, max_monotone_dt,
                        monotone_measure, spinup_radius)
from .optimize import BracketCapError, OptFamily, optimal_method, region_scan
from .problems import (LeVequeYeeConfig, leveque_yee_imex_problem, leveque_yee_problem,
                       scalar_cubic_problem)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_CAP = 4
EXIT_ORDER = 5
EXIT_SOLVER = 6

log = logging.getLogger("ssplmm")


class UsageError(Exception):
    pass


def _emit(obj, pretty=False):
    print(json.dumps(obj, indent=2 if pretty else None))


def _threads(flag):
    if flag is not None:
        return flag
    env = os.environ.get("THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"THREADS must be an integer, got {env!r}")
    return os.cpu_count() or 1


def cmd_optimize(args):
    if args.k < 1 or args.p < 1:
        raise UsageError("k and p must be positive")
    if args.y < 0 or args.tol <= 0:
        raise UsageError("need y >= 0 and tol > 0")
    try:
        res = optimal_method(args.family, args.k, args.p, args.y,
                             explicit=not args.implicit, bisect_tol=args.tol)
    except BracketCapError as exc:
        _emit({"status": "bracket-cap", "message": str(exc)})
        return EXIT_CAP
    if res is None:
        _emit({"status": "infeasible"})
        return EXIT_INFEASIBLE
    print(MethodDocument.from_result(res, tol=args.tol).to_json(pretty=args.pretty))
    return EXIT_OK


def cmd_region(args):
    if not 0 < args.ymin <= args.ymax or args.n < 1:
        raise UsageError("need 0 < ymin <= ymax and n >= 1")
    if args.n > 1 and args.ymin == args.ymax:
        raise UsageError("a grid of several points needs ymin < ymax")
    ys = np.geomspace(args.ymin, args.ymax, args.n)
    samples = region_scan(args.family, args.k, args.p, ys, explicit=not args.implicit,
                          workers=_threads(args.threads))
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["y", "C", "C_second"])
    for s in samples:
        out.writerow([f"{s.y:.12g}", f"{s.c:.12g}", f"{s.c_second:.12g}"])
    return EXIT_OK


def _support_ok(method, cert, p):
    if cert is None or cert.unbounded:
        return None
    k = method.k
    if method.family is mt.Family.ADDITIVE:
        delta = method.alpha - cert.r * method.beta[:k]
        count = np.count_nonzero(delta > 1e-10) + np.count_nonzero(method.beta > 1e-10)
    else:
        count = sum(np.count_nonzero(a > 1e-10)
                    for a in (cert.gamma, method.beta, method.beta_second))
    return bool(count <= p)


def _load_document(path):
    try:
        with open(path) as fh:
            return MethodDocument.from_json(fh.read())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}")
    except DocumentError as exc:
        raise UsageError(str(exc))


def cmd_certify(args):
    doc = _load_document(args.input)
    method = doc.table()
    p = doc.p if args.order is None else args.order
    y = doc.y if args.y is None else args.y
    if p < 1 or y < 0:
        raise UsageError("need order >= 1 and y >= 0")
    res = mt.order_residuals(method, p)
    max_res = float(np.max(np.abs(res)))
    order_ok = max_res <= mt.ORDER_TOL
    cert = mt.ssp_coefficient_pair(method, y)
    if cert is None:
        ssp = {"r": 0.0, "r_second": 0.0}
    elif cert.unbounded:
        ssp = {"r": None, "r_second": None, "unbounded": True}
    else:
        ssp = {"r": cert.r, "r_second": cert.r_second}
    report = {"order_ok": order_ok, "max_residual": max_res, "ssp": ssp,
              "nonzero_bound_ok": None if doc.kind == "imex" else _support_ok(method, cert, p)}
    if doc.kind == "additive":
        report["beta_equality_ok"] = bool(np.max(np.abs(method.beta - method.beta_second)) <= 1e-8)
    _emit(report, args.pretty)
    return EXIT_OK if order_ok else EXIT_ORDER


def _method_from_flag(value):
    if value in mt.BUILTIN_METHODS:
        return mt.BUILTIN_METHODS[value]()
    if not os.path.exists(value):
        raise UsageError(f"{value!r} is neither a builtin method nor a file "
                         f"(builtins: {', '.join(sorted(mt.BUILTIN_METHODS))})")
    return _load_document(value).table()


def _problem_from_flags(args):
    if args.problem == "cubic":
        u0 = args.u0 if args.u0 else list(default_u0_grid(args.u0_grid))
        if any(not 0 <= v <= 1 for v in u0):
            raise UsageError("cubic initial values must lie in [0, 1]")
        return scalar_cubic_problem(u0)
    try:
        cfg = LeVequeYeeConfig(m=args.m, dx=args.dx, mu=args.mu)
    except ValueError as exc:
        raise UsageError(str(exc))
    if args.problem == "leveque-yee":
        return leveque_yee_problem(cfg)
    return leveque_yee_imex_problem(cfg)


def cmd_integrate(args):
    if not args.dt > 0 or args.steps < 0:
        raise UsageError("need dt > 0 and steps >= 0")
    method = _method_from_flag(args.method)
    problem = _problem_from_flags(args)
    k = method.k
    summary = {"dt": args.dt, "steps": args.steps}
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            if args.dt <= spinup_radius(method, problem):
                traj = integrate(method, problem, args.dt, args.steps)
            else:
                # constant history when forward Euler cannot start monotonically
                hist = np.repeat(problem.initial_state[None, :], k, axis=0)
                traj = integrate(method, problem, args.dt, args.steps, Starting.SUPPLIED, hist)
        violation = monotone_measure(traj, k)
        summary["max_violation"] = violation if np.isfinite(violation) else None
        summary["monotone"] = bool(violation <= args.monotone_tol)
        if args.find_max_dt:
            lo, hi = args.dt_bracket
            if not 0 < lo < hi:
                raise UsageError("dt bracket must satisfy 0 < lo < hi")
            grid = [problem.initial_state] if not problem.componentwise else list(problem.initial_state)
            summary["max_monotone_dt"] = max_monotone_dt(method, problem, k, (lo, hi), grid,
                                                         n_steps=max(args.steps, 1))
    except NewtonError as exc:
        _emit({"status": "newton-failure", "message": str(exc), "residual": exc.residual})
        return EXIT_SOLVER
    if args.out:
        with open(args.out, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["n", "t"] + [f"u{i}" for i in range(problem.dimension)])
            for n, u in enumerate(traj.states):
                out.writerow([n, repr(n * args.dt)] + [repr(float(v)) for v in u])
    _emit(summary, args.pretty)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="ssplmm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    fam = [f.value for f in OptFamily]
    p = sub.add_parser("optimize", help="optimal SSP method as a JSON document")
    p.add_argument("--family", choices=fam, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--y", type=float, default=1.0)
    p.add_argument("--implicit", action="store_true")
    p.add_argument("--tol", type=float, default=1e-6, help="bisection tolerance on r")
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", dest="pretty", action="store_false")
    fmt.add_argument("--pretty", dest="pretty", action="store_true")
    p.set_defaults(func=cmd_optimize, pretty=False)

    p = sub.add_parser("region", help="SSP region as CSV over a log-spaced y grid")
    p.add_argument("--family", choices=fam, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--ymin", type=float, default=0.1)
    p.add_argument("--ymax", type=float, default=10.0)
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--implicit", action="store_true")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("certify", help="order and SSP report for a method document")
    p.add_argument("--input", required=True)
    p.add_argument("--y", type=float, default=None)
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--pretty", action="store_true")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("integrate", help="integrate a test problem and measure monotonicity")
    p.add_argument("--problem", choices=["cubic", "leveque-yee", "leveque-yee-imex"], required=True)
    p.add_argument("--method", required=True, help="builtin name or method document path")
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--u0", type=float, nargs="+", default=None)
    p.add_argument("--u0-grid", type=int, default=33)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--m", type=int, default=200)
    p.add_argument("--dx", type=float, default=None)
    p.add_argument("--monotone-tol", type=float, default=1e-13)
    p.add_argument("--find-max-dt", action="store_true")
    p.add_argument("--dt-bracket", type=float, nargs=2, default=(0.01, 8.0))
    p.add_argument("--out", default=None, help="write the trajectory as CSV")
    p.add_argument("--pretty", action="store_true")
    p.set_defaults(func=cmd_integrate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ssplmm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RuntimeError as exc:
        print(f"ssplmm: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
