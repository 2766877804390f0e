"""Command-line front end.

::

    secularbilliards simulate --scenario FILE --out DIR [--tol X] [--qtol X] [--samples N] [--svg PATH]
    secularbilliards billiard --scenario FILE --out DIR [...]
    secularbilliards check SUITE [SUITE ...] [--samples N] [--seed N] [--out DIR]
    secularbilliards sweep --scenario FILE [--scenario FILE ...] --out DIR [--jobs N]

``--scenario`` takes a JSON file or ``builtin:NAME`` (see ``list``).
Exit codes: 0 pass, 2 configuration error, 3 singularity or other early
stop of the integration, 4 billiard degeneracy, 5 bound or check failure.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import catalog
from .checks import SUITES, run_suite
from .errors import ScenarioError
from .runner import (
    BOUNCE_COLUMNS,
    EXIT_CHECK,
    EXIT_CONFIG,
    EXIT_OK,
    TRAJECTORY_COLUMNS,
    _atomic_write,
    billiard,
    execute,
    simulate,
    write_artifacts,
    write_json,
)
from .scenario import Scenario, expand_sweep, parse_scenario, scenario_from_dict

__all__ = ["main", "build_parser", "load_scenario"]


def _columns_help() -> str:
    lines = ["trajectory.csv columns:"]
    lines += [f"  {k:<18} {v}" for k, v in TRAJECTORY_COLUMNS.items()]
    lines.append("bounces.csv columns:")
    lines += [f"  {k:<18} {v}" for k, v in BOUNCE_COLUMNS.items()]
    lines.append("exit codes: 0 pass, 2 config error, 3 singularity/early stop, 4 billiard degeneracy, 5 check failure")
    return "\n".join(lines)


def load_scenario(spec: str) -> Scenario:
    """Parse a scenario file, or fetch ``builtin:NAME`` from the catalog."""
    if spec.startswith("builtin:"):
        name = spec.split(":", 1)[1]
        try:
            sc = catalog.get(name)
        except KeyError as exc:
            raise ScenarioError(str(exc.args[0])) from None
        # validate like a file would be
        return scenario_from_dict(sc.to_dict(), spec)
    return parse_scenario(spec)


def _override(sc: Scenario, args) -> Scenario:
    run = sc.run
    if getattr(args, "tol", None) is not None:
        run = replace(run, tol=args.tol)
    if getattr(args, "qtol", None) is not None:
        run = replace(run, qtol=args.qtol)
    if getattr(args, "samples", None) is not None:
        run = replace(run, samples=args.samples)
    sc = replace(sc, run=run)
    if getattr(args, "seed", None) is not None:
        sc = replace(sc, seed=args.seed)
    # re-validate the overridden values
    return scenario_from_dict(sc.to_dict(), sc.name)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="secularbilliards",
        description="Kepler, two-center and secular billiard simulations.",
        epilog=_columns_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def run_opts(p):
        p.add_argument("--scenario", required=True, help="scenario JSON file or builtin:NAME")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--tol", type=float, help="integrator tolerance (overrides run.tol)")
        p.add_argument("--qtol", type=float, help="averaging quadrature tolerance (overrides run.qtol)")
        p.add_argument("--samples", type=int, help="rows in trajectory.csv (overrides run.samples)")
        p.add_argument("--seed", type=int, help="RNG seed (overrides seed)")
        p.add_argument("--svg", help="also draw the trajectory to this SVG file")

    for name, text in (("simulate", "integrate a scenario and write trajectory.csv and summary.json"),
                       ("billiard", "run a scenario with walls; also writes bounces.csv")):
        p = sub.add_parser(name, help=text, description=text, epilog=_columns_help(),
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        run_opts(p)

    p = sub.add_parser("check", help="run self-check suites", description="run self-check suites")
    p.add_argument("suites", nargs="*", metavar="SUITE",
                   help=f"suites to run (default: all of {', '.join(SUITES)})")
    p.add_argument("--scenario", help="take the suites and seed from a scenario's 'checks' and 'seed'")
    p.add_argument("--samples", type=int, help="random draws per suite")
    p.add_argument("--seed", type=int, help="RNG seed")
    p.add_argument("--out", help="directory for check_report.json")

    p = sub.add_parser("sweep", help="run a batch of scenarios (and their sweep variants)",
                       description="run a batch of scenarios", epilog=_columns_help(),
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--scenario", action="append", required=True, help="scenario file or builtin:NAME (repeatable)")
    p.add_argument("--out", required=True, help="output directory; one subdirectory per scenario")
    p.add_argument("--jobs", type=int, default=1, help="scenarios run concurrently")
    p.add_argument("--tol", type=float)
    p.add_argument("--qtol", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)

    sub.add_parser("list", help="list built-in scenarios")
    return parser


def _report(summary: dict, out: Path):
    print(f"{summary['name']}: status={summary['status']} exit={summary['exit_code']} -> {out}")
    for v in summary.get("violations", []):
        print(f"  {v}")


def _cmd_run(args, fn) -> int:
    sc = _override(load_scenario(args.scenario), args)
    if fn is billiard and not sc.walls:
        raise ScenarioError(f"{args.scenario}: walls: the billiard command needs a scenario with walls")
    if fn is simulate and sc.walls:
        raise ScenarioError(f"{args.scenario}: walls: use the billiard command for scenarios with walls")
    res = fn(sc)
    write_artifacts(res, args.out, args.svg)
    _report(res.summary, Path(args.out))
    return res.exit_code


def _cmd_check(args) -> int:
    suites = list(args.suites)
    seed = args.seed
    if args.scenario:
        sc = load_scenario(args.scenario)
        suites = suites or list(sc.checks)
        seed = sc.seed if seed is None else seed
    suites = suites or list(SUITES)
    unknown = [s for s in suites if s not in SUITES]
    if unknown:
        raise ScenarioError(f"unknown check suite(s) {', '.join(unknown)}; expected {', '.join(SUITES)}")
    seed = 0 if seed is None else seed
    if args.samples is not None and args.samples < 1:
        raise ScenarioError("--samples must be positive")
    reports = [run_suite(s, args.samples, seed) for s in suites]
    for r in reports:
        print(r.line())
    if args.out:
        write_json(Path(args.out) / "check_report.json", {"seed": seed, "reports": [r.as_dict() for r in reports]})
    return EXIT_OK if all(r.passed for r in reports) else EXIT_CHECK


def _sweep_one(payload):
    doc, out = payload
    sc = scenario_from_dict(doc, doc["name"])
    res = execute(sc)
    write_artifacts(res, Path(out) / sc.name)
    s = res.summary
    return [sc.name, s["status"], res.exit_code, len(res.run.bounces) if res.run else 0,
            *(s["max_drift"][k] for k in ("E_target", "E_kep", "D", "E_sph"))]


def _cmd_sweep(args) -> int:
    variants = []
    for spec in args.scenario:
        sc = _override(load_scenario(spec), args)
        variants += expand_sweep(sc, spec)
    names = [v.name for v in variants]
    if len(set(names)) != len(names):
        raise ScenarioError("sweep: scenario names must be unique within a batch")
    if args.jobs < 1:
        raise ScenarioError("--jobs must be at least 1")
    payloads = [(v.to_dict(), args.out) for v in variants]
    if args.jobs == 1:
        rows = [_sweep_one(p) for p in payloads]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_one, payloads))
    cols = ["name", "status", "exit_code", "bounces", "drift_E_target", "drift_E_kep", "drift_D", "drift_E_sph"]
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join([r[0], r[1], str(r[2]), str(r[3]), *(repr(float(x)) for x in r[4:])]))
        print(f"{r[0]}: status={r[1]} exit={r[2]}")
    _atomic_write(Path(args.out) / "sweep.csv", "\n".join(lines) + "\n")
    return max((r[2] for r in rows), default=EXIT_OK)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors, which matches the config-error code
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        if args.command == "simulate":
            return _cmd_run(args, simulate)
        if args.command == "billiard":
            return _cmd_run(args, billiard)
        if args.command == "check":
            return _cmd_check(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "list":
            for n in catalog.names():
                print(n)
            return EXIT_OK
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
