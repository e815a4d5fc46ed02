"""Command line entry point.

Exit codes: 0 success, 1 usage error, 2 scenario validation error,
3 divergence, 4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

from .control import Gains
from .errors import DivergenceError, ScenarioError
from .io import emit, read_csv
from .kinematics import find_singularities
from .scenario import BUILTIN_CASES, builtin_case, load_scenario
from .sim import Scenario, run, verify_run

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SCENARIO = 2
EXIT_DIVERGENCE = 3
EXIT_VERIFY = 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _add_source(p, required=True):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--case", choices=sorted(BUILTIN_CASES), help="built-in scenario")
    g.add_argument("--config", type=Path, help="scenario JSON file")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mixform", description="Formation control of mixed fully/under-actuated planar arms.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="simulate a scenario and write artifacts")
    _add_source(p)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--dt", type=float)
    p.add_argument("--t-final", type=float)
    p.add_argument("--kp", type=float)
    p.add_argument("--kd", type=float)
    p.add_argument("--log-stride", type=int)
    p.add_argument("--svg", action="store_true", help="also write SVG plots")
    p.add_argument("--strict", action="store_true", help="exit 4 if any monitor fails")

    p = sub.add_parser("verify", help="re-check the monitors of a trajectory CSV")
    p.add_argument("--log", type=Path, required=True, help="trajectory CSV written by 'run'")
    _add_source(p, required=False)
    p.add_argument("--json", action="store_true", help="print the report as JSON")

    p = sub.add_parser("singularities", help="points where a PA arm's augmented Jacobian is singular")
    _add_source(p)
    p.add_argument("--agent", type=int, required=True, help="one-based agent index")
    p.add_argument("--lo", type=float, default=-math.pi)
    p.add_argument("--hi", type=float, default=math.pi)
    return parser


def _scenario(args) -> Scenario:
    if args.case:
        return builtin_case(args.case)
    return load_scenario(args.config)


def _cmd_run(args) -> int:
    scenario = _scenario(args)
    cfg = scenario.config
    gains = Gains(
        args.kp if args.kp is not None else cfg.gains.kp,
        args.kd if args.kd is not None else cfg.gains.kd,
    )
    changes = {"gains": gains}
    if args.dt is not None:
        changes["dt"] = args.dt
    if args.t_final is not None:
        changes["t_final"] = args.t_final
    if args.log_stride is not None:
        changes["log_stride"] = args.log_stride
    scenario = Scenario(scenario.network, cfg.replace(**changes), scenario.name)

    formats = ["csv", "json"] + (["svg"] if args.svg else [])
    started = time.perf_counter()
    try:
        log = run(scenario)
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        partial = getattr(exc, "log", None)
        if partial is not None and len(partial):
            emit(partial, args.out, ["csv"])
        return EXIT_DIVERGENCE
    elapsed = time.perf_counter() - started
    report = verify_run(log)
    artifacts = emit(log, args.out, formats, report)
    print(f"{scenario.name}: {len(log)} samples to t={log.t[-1]:g} s in {elapsed:.2f} s")
    for m in report.monitors:
        print("  " + m.line())
    print(f"wrote {artifacts.csv}, {artifacts.summary}" + "".join(f", {p}" for p in artifacts.plots))
    if args.strict and not report.passed:
        return EXIT_VERIFY
    return EXIT_OK


def _cmd_verify(args) -> int:
    if args.case or args.config:
        scenario = _scenario(args)
    else:
        sibling = args.log.parent / "scenario.json"
        if not sibling.exists():
            raise _UsageError(f"no scenario.json next to {args.log}; pass --case or --config")
        scenario = load_scenario(sibling)
    try:
        log = read_csv(args.log, scenario)
    except FileNotFoundError:
        raise _UsageError(f"no such file: {args.log}") from None
    except ValueError as exc:
        raise _UsageError(str(exc)) from None
    if not len(log):
        raise _UsageError(f"{args.log} has no samples")
    report = verify_run(log)
    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
    else:
        for m in report.monitors:
            print(m.line())
        print("verified" if report.passed else "verification FAILED")
    return EXIT_OK if report.passed else EXIT_VERIFY


def _cmd_singularities(args) -> int:
    scenario = _scenario(args)
    agents = scenario.network.agents
    if not 1 <= args.agent <= len(agents):
        raise _UsageError(f"--agent must be in [1, {len(agents)}]")
    agent = agents[args.agent - 1]
    if not agent.is_pa:
        raise _UsageError(f"agent {args.agent} is fully actuated; singular only at q2 = k*pi")
    started = time.perf_counter()
    roots = find_singularities(agent.alpha, agent.params, agent.branch, (args.lo, args.hi))
    elapsed = time.perf_counter() - started
    for r in roots:
        print(f"{r:.6f}")
    print(f"{len(roots)} root(s) in ({args.lo:g}, {args.hi:g}) in {elapsed:.3f} s", file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handler = {"run": _cmd_run, "verify": _cmd_verify, "singularities": _cmd_singularities}[args.command]
    try:
        return handler(args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
