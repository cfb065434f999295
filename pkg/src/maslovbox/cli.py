"""Command-line front end.

Subcommands: check (assumption validation), count (spectral count at one
lambda), curves (conjugate-point sweep to CSV + PNG), box (four-shelf
consistency run), oracle (finite-difference count).

Exit codes: 0 success, 2 assumption violation, 3 configuration error,
4 inconsistent box, 5 unsupported feature.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

import numpy as np

from . import maslov, oracle, pencil, plots, problems
from .frameflow import IntegratorOptions
from .maslov import InconsistentBoxError
from .oracle import UnsupportedBoundaryError
from .problems import BUILTINS, ConfigError

EXIT_OK = 0
EXIT_ASSUMPTION = 2
EXIT_CONFIG = 3
EXIT_BOX = 4
EXIT_UNSUPPORTED = 5


def _resolve_problem(spec: str) -> pencil.PencilProblem:
    if spec in BUILTINS:
        return problems.builtin_problem(spec)
    if os.path.exists(spec):
        return problems.load_problem(spec)
    raise ConfigError(f"{spec!r} is neither a builtin problem nor an existing file")


def _opts(args) -> IntegratorOptions:
    return IntegratorOptions(rel_tol=args.rel_tol, abs_tol=args.abs_tol)


def _lambda_hi(p: pencil.PencilProblem, args) -> float:
    if getattr(args, "lambda_hi", None) is not None:
        return args.lambda_hi
    return pencil.lambda_max(p)


def _report_dict(report: maslov.SpectralCountReport) -> dict:
    out = {
        "lambda": report.lam,
        "N": report.N,
        "morse": report.morse_correction[0],
        "morse_kernel": report.morse_correction[1],
        "kernel_dim": report.kernel_dim_at_lambda,
        "shelves": {
            s.shelf: {
                "maslov": s.maslov,
                "crossings": [
                    {"param": cp.param, "multiplicity": cp.multiplicity,
                     "direction": cp.direction}
                    for cp in s.crossings
                ],
            }
            for s in report.shelf_results
        },
    }
    left = report.shelf("left")
    if left is not None:
        out["maslov"] = left.maslov
    if report.box_sum is not None:
        out["box_sum"] = report.box_sum
    if report.oracle_count is not None:
        out["oracle_count"] = report.oracle_count
    if report.notes:
        out["notes"] = list(report.notes)
    return out


def cmd_check(args) -> int:
    p = _resolve_problem(args.problem)
    lam_hi = _lambda_hi(p, args)
    verdicts = {}
    gamma = None
    sides = ["minus"] + (["plus"] if p.coeffs.limits_plus is not None else [])
    for side in sides:
        limits = p.coeffs.limit(side)
        rep = pencil.check_hyperbolicity(
            limits, pencil.default_mu_grid(limits, lam_hi)
        )
        verdicts[f"hyperbolic_{side}"] = rep.ok["hyperbolic"]
        if rep.gamma_estimate is not None:
            gamma = rep.gamma_estimate if gamma is None else max(gamma, rep.gamma_estimate)
    if p.domain == "half":
        rep = pencil.check_boundary_assumptions(p.boundary, np.linspace(0.0, lam_hi, 20))
        verdicts.update(rep.ok)
    out = {"problem": args.problem, "lambda_max": lam_hi, "assumptions": verdicts,
           "gamma_estimate": gamma}
    print(json.dumps(out, indent=2))
    if any(v is False for v in verdicts.values()):
        return EXIT_ASSUMPTION
    return EXIT_OK


def cmd_count(args) -> int:
    p = _resolve_problem(args.problem)
    report = maslov.spectral_count(p, args.lam, _opts(args))
    out = _report_dict(report)
    if args.oracle:
        try:
            oc = oracle.oracle_count(p, args.lam, _lambda_hi(p, args))
        except UnsupportedBoundaryError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_UNSUPPORTED
        out["oracle_count"] = oc.count
        out["oracle_roots"] = list(oc.roots)
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_curves(args) -> int:
    p = _resolve_problem(args.problem)
    lam_hi = _lambda_hi(p, args)
    grid = np.linspace(args.lambda_lo, lam_hi, args.grid)
    rows = maslov.eigenvalue_curves(p, grid, _opts(args), refine_levels=args.refine)
    with open(args.out, "w", newline="") as fh:
        maslov.curves_to_csv(rows, fh)
    png = os.path.splitext(args.out)[0] + ".png"
    plots.plot_curves(rows, png, title=args.problem)
    print(json.dumps({"csv": args.out, "png": png, "rows": len(rows)}))
    return EXIT_OK


def cmd_box(args) -> int:
    p = _resolve_problem(args.problem)
    lam_hi = _lambda_hi(p, args)
    try:
        report = maslov.maslov_box(p, args.lambda_lo, lam_hi, _opts(args))
    except InconsistentBoxError as exc:
        print(json.dumps(_report_dict(exc.report), indent=2))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BOX
    print(json.dumps(_report_dict(report), indent=2))
    return EXIT_OK


def cmd_oracle(args) -> int:
    p = _resolve_problem(args.problem)
    lam_hi = _lambda_hi(p, args)
    audit = [] if args.audit else None
    try:
        oc = oracle.oracle_count(p, args.lam, lam_hi, h_target=args.h,
                                 steps=args.steps, audit_rows=audit)
    except UnsupportedBoundaryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    if args.audit:
        with open(args.audit, "w", newline="") as fh:
            oracle.audit_to_csv(audit, fh)
    out = {"method": "fd-scan", "count": oc.count, "roots": list(oc.roots),
           "lambda_lo": args.lam, "lambda_hi": lam_hi}
    if oc.caveats:
        out["caveats"] = list(oc.caveats)
    print(json.dumps(out, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maslovbox",
        description="Count unstable real eigenvalues of quadratic operator "
        "pencils by Lagrangian-frame propagation, with a finite-difference "
        "cross-check.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--problem", required=True,
                        help="builtin name or path to a JSON problem file")
        sp.add_argument("--rel-tol", dest="rel_tol", type=float, default=1e-8)
        sp.add_argument("--abs-tol", dest="abs_tol", type=float, default=1e-10)
        sp.add_argument("--lambda-hi", dest="lambda_hi", type=float, default=None,
                        help="override the computed spectral upper bound")

    sp = sub.add_parser("check", help="validate structural assumptions")
    common(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("count", help="spectral count at one lambda")
    common(sp)
    sp.add_argument("--lambda", dest="lam", type=float, default=0.0)
    sp.add_argument("--oracle", action="store_true",
                    help="also run the finite-difference count")
    sp.set_defaults(func=cmd_count)

    sp = sub.add_parser("curves", help="conjugate-point curves to CSV and PNG")
    common(sp)
    sp.add_argument("--lambda-lo", dest="lambda_lo", type=float, default=0.0)
    sp.add_argument("--grid", type=int, default=40)
    sp.add_argument("--refine", type=int, default=1)
    sp.add_argument("--out", required=True, help="CSV output path")
    sp.set_defaults(func=cmd_curves)

    sp = sub.add_parser("box", help="four-shelf consistency run")
    common(sp)
    sp.add_argument("--lambda-lo", dest="lambda_lo", type=float, default=0.0)
    sp.set_defaults(func=cmd_box)

    sp = sub.add_parser("oracle", help="finite-difference eigenvalue count")
    common(sp)
    sp.add_argument("--lambda", dest="lam", type=float, default=0.0)
    sp.add_argument("--steps", type=int, default=200)
    sp.add_argument("--h", type=float, default=None, help="grid spacing target")
    sp.add_argument("--audit", default=None, help="write a determinant scan CSV")
    sp.set_defaults(func=cmd_oracle)
    return parser


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UnsupportedBoundaryError as exc:
        print(f"unsupported: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED


if __name__ == "__main__":
    sys.exit(main())
