"""Command line: ``weylflow {check, flow, bryant, list}``.

Exit codes: 0 when everything executed passes, 1 on any failure, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys

from . import __version__
from .catalog import CatalogError, default_catalog, parse_selector
from .exprdsl import ExprError
from .flow import FlowError, get_family, integrate_flow, singularity_type, trajectory_rows
from .identities import (CSV_COLUMNS, REGISTRY, CheckError, applicable_checks, reports_to_json,
                         reports_to_rows, run_suite)
from .soliton import SolitonError, bryant_solve, bryant_summary

SELECTOR_GRAMMAR = """\
metric selector:  NAME[:KEY=VALUE[,KEY=VALUE]...]
  e.g. sphere:n=4,r=2   product_spheres:p=2,q=2,a=1,b=1   warped_interval:n=4,K=-1,h=cosh
families: euclidean sphere hyperbolic cylinder_RxS product_spheres warped_interval
          lcf_example gaussian_soliton bryant_profile perturbed_flat
"""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="weylflow", description="Numerical verification of Ricci flow curvature identities.",
                allow_abbrev=False)
    p.add_argument("--version", action="version", version=f"weylflow {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("check", help="run identity checks", allow_abbrev=False)
    which = c.add_mutually_exclusive_group(required=True)
    which.add_argument("--all", action="store_true", help="the whole default catalog")
    which.add_argument("--metric", action="append", metavar="SELECTOR", help="catalog entry (repeatable)")
    c.add_argument("--check", action="append", metavar="ID", help="restrict to these check ids (repeatable)")
    c.add_argument("--seed", type=int, default=42)
    c.add_argument("--points", type=int, default=20)
    c.add_argument("--threads", type=int, default=None, help="worker threads (default: WEYLFLOW_THREADS or 1)")
    c.add_argument("--output", "-o", default=None)
    c.add_argument("--format", choices=("json", "csv"), default="json")

    f = sub.add_parser("flow", help="integrate a reduced Ricci flow", allow_abbrev=False)
    f.add_argument("--family", required=True, choices=("round_sphere", "product_spheres", "cylinder", "flat"))
    f.add_argument("--n", type=int, default=4)
    f.add_argument("--p", type=int, default=2)
    f.add_argument("--q", type=int, default=2)
    f.add_argument("--a0", type=float, default=1.0, help="first factor radius (cylinder: line scale)")
    f.add_argument("--b0", type=float, default=1.0, help="second factor radius")
    f.add_argument("--r0", type=float, default=1.0, help="round sphere radius")
    f.add_argument("--dt", type=float, default=1e-3)
    f.add_argument("--steps", type=int, default=None, help="default: run to the singular time")
    f.add_argument("--output", "-o", default=None)
    f.add_argument("--format", choices=("csv",), default="csv")

    b = sub.add_parser("bryant", help="solve and certify the Bryant soliton profile", allow_abbrev=False)
    b.add_argument("--n", type=int, default=4)
    b.add_argument("--length", type=float, default=8.0)
    b.add_argument("--tol", type=float, default=1e-6)
    b.add_argument("--output", "-o", default=None, help="profile CSV (default stdout)")
    b.add_argument("--summary", default=None, help="residual summary JSON (default stderr)")
    b.add_argument("--format", choices=("csv",), default="csv")

    sub.add_parser("list", help="catalog entries and the checks that apply to them", allow_abbrev=False)
    return p


def _emit(text: str, path: str | None, stream=None):
    if path is None:
        (stream or sys.stdout).write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x):
    if isinstance(x, float):
        return "%.17g" % x if math.isfinite(x) else "nan"
    return x


def cmd_check(args) -> int:
    entries = default_catalog() if args.all else [parse_selector(s) for s in args.metric]
    if args.points < 0:
        raise UsageError("--points must be >= 0")
    if args.check:
        unknown = [c for c in args.check if c not in REGISTRY]
        if unknown:
            raise UsageError(f"unknown check id(s): {', '.join(unknown)}")
        usable = {c for e in entries for c in applicable_checks(e)}
        idle = [c for c in args.check if c not in usable]
        if idle:
            raise UsageError(f"check(s) {', '.join(idle)} apply to none of the selected metrics")
    reports = run_suite(entries, seed=args.seed, point_count=args.points, threads=args.threads,
                        checks=set(args.check) if args.check else None)
    if args.format == "json":
        header = {"tool": "weylflow", "version": __version__, "seed": args.seed, "points": args.points,
                  "metrics": [e.label for e in entries], "checks": sorted(args.check) if args.check else "all"}
        _emit(reports_to_json(reports, header), args.output)
    else:
        _emit(_csv(CSV_COLUMNS, reports_to_rows(reports)), args.output)
    failed = [r for r in reports if r.status != "pass"]
    for r in failed:
        print(f"{r.status.upper()}: {r.check_id} on {r.metric}: residual {r.max_residual} "
              f"(tol {r.tolerance:g}) {r.reason}", file=sys.stderr)
    return 1 if failed else 0


def _initial_state(args):
    if args.family == "round_sphere":
        return get_family("round_sphere", n=args.n), (args.r0**2,)
    if args.family == "product_spheres":
        return get_family("product_spheres", p=args.p, q=args.q), (args.a0**2, args.b0**2)
    if args.family == "cylinder":
        return get_family("cylinder", n=args.n), (args.a0**2, args.b0**2)
    return get_family("flat", n=args.n), (args.a0**2,)


def cmd_flow(args) -> int:
    if args.dt <= 0:
        raise UsageError("--dt must be positive")
    fam, g0 = _initial_state(args)
    steps = args.steps
    if steps is None:
        # every reduced family shrinks linearly; run slightly past the singular time
        rates = fam.rhs(g0)
        ts = [-s / r for s, r in zip(g0, rates) if r < 0]
        steps = int(math.ceil(1.01 * min(ts) / args.dt)) if ts else 100
    traj = integrate_flow(fam, g0, args.dt, steps)
    header, rows = trajectory_rows(traj)
    _emit(_csv(header, ([_fmt(x) for x in row] for row in rows)), args.output)
    rep = singularity_type(traj)
    T = "none" if traj.blowup_time is None else "%.17g" % traj.blowup_time
    limit = "none" if rep.limit is None else "%.17g" % rep.limit
    print(f"family={fam.name} blowup_time={T} singularity={rep.kind} limit={limit} stop={traj.stop_reason}",
          file=sys.stderr)
    return 0


def cmd_bryant(args) -> int:
    profile = bryant_solve(args.n, args.length, tol=args.tol)
    _emit(_csv(("t", "h", "h_prime", "h_second", "f_prime", "R", "lambda", "mu"),
               ([_fmt(float(x)) for x in row] for row in profile.rows())), args.output)
    summary = bryant_summary(profile)
    ok = all(summary[k] <= args.tol for k in ("soliton_residual", "weyl_residual"))
    summary["tolerance"] = args.tol
    summary["pass"] = ok
    from .identities import _encode

    _emit(_encode(summary) + "\n", args.summary, sys.stderr)
    return 0 if ok else 1


def cmd_list(args) -> int:
    for e in default_catalog():
        print(f"{e.label}\n    {' '.join(applicable_checks(e))}")
    return 0


COMMANDS = {"check": cmd_check, "flow": cmd_flow, "bryant": cmd_bryant, "list": cmd_list}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        print(parser.format_usage() + SELECTOR_GRAMMAR, file=sys.stderr, end="")
        return 2
    except (CatalogError, ExprError, FlowError, CheckError) as exc:
        print(f"weylflow: {exc}", file=sys.stderr)
        print(SELECTOR_GRAMMAR, file=sys.stderr, end="")
        return 2
    except SolitonError as exc:
        print(f"weylflow: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
