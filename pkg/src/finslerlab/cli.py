"""
Command-line front end.

Exit codes: 0 all applicable checks pass, 1 a check failed, 2 malformed
flags, 3 domain error (point outside the metric's domain, degenerate or
singular metric).  ``FINSLERLAB_OUTPUT_DIR`` sets where reports are written
when ``--output`` is not given; otherwise they go to standard output.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from .catalog import FAMILIES, MetricSpec, list_catalog
from .curvature import bundle_for
from .errors import DegenerateMetricError, DomainError, SingularityError, UsageError
from .verifier import (
    DEFAULT_TOL,
    Grid,
    SuiteConfig,
    VerificationReport,
    oracle_equivalence,
    phi_from_q,
    run_suite,
    solve_q,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_DOMAIN = 0, 1, 2, 3
OUTPUT_ENV = "FINSLERLAB_OUTPUT_DIR"
ORACLE_MAX_N = 6
ORACLE_TOL = 1e-6
PARAM_FLAGS = ("eps", "C", "D", "K", "a", "b", "branch")


def _add_metric(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("metric")
    g.add_argument("--metric", required=True, choices=sorted(FAMILIES), help="catalog family")
    g.add_argument("--eps", type=float, help="shen parameter")
    g.add_argument("--C", type=float, help="constant C of the solution families")
    g.add_argument("--D", type=float, help="constant D of the solution families")
    g.add_argument("--K", type=float,
                   help="curvature constant: a parameter of soln1/soln_family and the K used by the checks")
    g.add_argument("--a", type=float, help="test_poly coefficient of s")
    g.add_argument("--b", type=float, help="test_poly coefficient of r^2")
    g.add_argument("--branch", choices=("++", "+-", "-+", "--"), help="soln_family root branch")
    g.add_argument("--n", type=int, default=3, help="dimension (default 3)")
    g.add_argument("--r-min", type=float, default=None, help="smallest sampled radius (default 1e-3)")
    g.add_argument("--rho", type=float, default=None, help="radius of the domain ball")


def _add_output(p: argparse.ArgumentParser, formats=("json", "csv", "text"), default="text") -> None:
    p.add_argument("--format", choices=formats, default=default)
    p.add_argument("--output", help="output file (default: standard output)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="finslerlab", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("catalog", help="list the metric families")
    _add_output(p, ("json", "text"))

    p = sub.add_parser("verify", help="run every check on a grid")
    _add_metric(p)
    p.add_argument("--grid", type=int, nargs=2, default=(40, 40), metavar=("NR", "NS"))
    p.add_argument("--delta", type=float, default=1e-3, help="relative margin from the domain boundary")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--seed", type=int, default=42)
    _add_output(p)

    p = sub.add_parser("scan", help="curvature quantities at every grid point")
    _add_metric(p)
    p.add_argument("--grid", type=int, nargs=2, default=(10, 10), metavar=("NR", "NS"))
    p.add_argument("--delta", type=float, default=1e-3)
    _add_output(p, ("json", "csv"), "json")

    p = sub.add_parser("oracle-check", help="compare the reduced formulas with the generic oracle")
    _add_metric(p)
    p.add_argument("--points", type=int, default=20)
    p.add_argument("--tol", type=float, default=ORACLE_TOL)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--depth", choices=("R", "chi", "H"), default="H")
    _add_output(p, ("json", "text"))

    p = sub.add_parser("solve-q", help="roots of D^2 q^4 + (u - C) q^2 - K = 0")
    p.add_argument("--u", type=float, required=True)
    p.add_argument("--C", type=float, required=True)
    p.add_argument("--D", type=float, required=True)
    p.add_argument("--K", type=float, required=True)
    p.add_argument("--v", type=float, default=0.0, help="value of v = s for phi (default 0)")
    _add_output(p, ("json", "text"))

    p = sub.add_parser("report", help="re-read a JSON report and recompute its verdicts")
    p.add_argument("path")
    _add_output(p, ("json", "text"))
    return parser


def spec_from_args(args) -> MetricSpec:
    family = FAMILIES[args.metric]
    params = {}
    for name in PARAM_FLAGS:
        value = getattr(args, name, None)
        if value is None:
            continue
        if name in family.defaults:
            params[name] = value
        elif name != "K":
            raise UsageError(f"--{name} does not apply to metric {args.metric}")
    kwargs = {"n": args.n, "rho": args.rho}
    if args.r_min is not None:
        kwargs["r_min"] = args.r_min
    return MetricSpec(args.metric, params, **kwargs)


def _emit(text: str, args, default_name: str) -> None:
    target = args.output
    out_dir = os.environ.get(OUTPUT_ENV)
    if target is None and out_dir:
        target = str(Path(out_dir) / default_name)
    if target is None:
        sys.stdout.write(text)
        return
    path = Path(target)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    print(f"wrote {path}", file=sys.stderr)


def _ext(fmt: str) -> str:
    return {"json": "json", "csv": "csv", "text": "txt"}[fmt]


def cmd_catalog(args) -> int:
    rows = list_catalog()
    if args.format == "json":
        _emit(json.dumps(rows, indent=2, sort_keys=True) + "\n", args, "catalog.json")
    else:
        lines = [f"{'family':<16}{'K':<14}parameters"]
        for row in rows:
            lines.append(f"{row['family']:<16}{str(row['K_target']):<14}{row['params']}")
            lines.append(f"{'':<16}{row['note']}")
        _emit("\n".join(lines) + "\n", args, "catalog.txt")
    return EXIT_OK


def cmd_verify(args) -> int:
    spec = spec_from_args(args)
    grid = Grid(args.grid[0], args.grid[1], delta=args.delta)
    config = SuiteConfig(grid=grid, tol=args.tol, K=args.K, seed=args.seed)
    report = run_suite(spec, config)
    body = {"json": report.to_json, "csv": report.to_csv, "text": report.to_text}[args.format]()
    _emit(body, args, f"verify-{args.metric}.{_ext(args.format)}")
    if args.format != "text" and not report.passed and args.output is None:
        print(_failure_summary(report), file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_FAIL


def _failure_summary(report: VerificationReport) -> str:
    failed = [f"{c.name} (max {c.max_residual:.3e} > {c.tolerance:g})" if c.max_residual is not None
              else f"{c.name} ({c.message})" for c in report.checks if c.passed is False]
    return "failed: " + ", ".join(failed)


def cmd_scan(args) -> int:
    spec = spec_from_args(args)
    points = Grid(args.grid[0], args.grid[1], delta=args.delta).points(spec)
    records = bundle_for(spec, points).to_records()
    if args.format == "json":
        body = json.dumps({"spec": spec.to_dict(), "records": records}, indent=2, sort_keys=True) + "\n"
    else:
        keys = list(records[0])
        lines = [",".join(keys)] + [",".join(repr(rec[k]) for k in keys) for rec in records]
        body = "\n".join(lines) + "\n"
    _emit(body, args, f"scan-{args.metric}.{_ext(args.format)}")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    if not 2 <= args.n <= ORACLE_MAX_N:
        raise UsageError(f"oracle-check supports 2 <= n <= {ORACLE_MAX_N}, got {args.n}")
    if args.points < 1:
        raise UsageError("--points must be positive")
    spec = spec_from_args(args)
    report = oracle_equivalence(spec, args.points, args.seed, args.tol, args.depth)
    body = report.to_json() if args.format == "json" else report.to_text()
    _emit(body, args, f"oracle-{args.metric}.{_ext(args.format)}")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_solve_q(args) -> int:
    sol = solve_q(args.u, args.C, args.D, args.K)
    values = phi_from_q(sol, args.v)
    admissible = [pv.branch for pv in values if pv.admissible]
    if admissible:
        sol = dataclasses.replace(sol, branch_used=admissible[0])
    if args.format == "json":
        data = sol.to_dict()
        data["v"] = args.v
        data["phi"] = [vars(pv) for pv in values]
        body = json.dumps(data, indent=2, sort_keys=True) + "\n"
    else:
        lines = [f"D^2 q^4 + (u - C) q^2 - K = 0 with u={args.u:g} C={args.C:g} D={args.D:g} K={args.K:g}"]
        if sol.discriminant is not None:
            lines.append(f"discriminant (C-u)^2 + 4 D^2 K = {sol.discriminant:.12g}")
        if sol.message:
            lines.append(sol.message)
        for root, pv in zip(sol.roots, values):
            flag = "" if pv.admissible else "  (phi <= 0)"
            lines.append(f"branch {root.branch}  q = {root.q:+.12g}  q^2 = {root.q2:.12g}  "
                         f"mult {root.multiplicity}  residual {root.residual:.1e}  phi(v={args.v:g}) = {pv.phi:.12g}{flag}")
        body = "\n".join(lines) + "\n"
    _emit(body, args, f"solve-q.{_ext(args.format)}")
    return EXIT_OK if admissible else EXIT_FAIL


def cmd_report(args) -> int:
    try:
        data = json.loads(Path(args.path).read_text())
        report = VerificationReport.from_dict(data)
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot read report {args.path}: {exc}") from exc
    body = report.to_json() if args.format == "json" else report.to_text()
    _emit(body, args, Path(args.path).stem + f"-reread.{_ext(args.format)}")
    return EXIT_OK if report.passed else EXIT_FAIL


COMMANDS = {
    "catalog": cmd_catalog,
    "verify": cmd_verify,
    "scan": cmd_scan,
    "oracle-check": cmd_oracle_check,
    "solve-q": cmd_solve_q,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with np.errstate(all="ignore"):
            return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, DegenerateMetricError, SingularityError) as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
