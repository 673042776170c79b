"""Command-line driver: ``contend run|compare|verify|oracle``."""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .auction import AuctionError
from .instances import random_unique_instances
from .io import (
    ScenarioParseError,
    ScenarioValidationError,
    default_output_dir,
    fmt,
    load_scenario,
    resolve_scenario_path,
    write_trace,
)
from .model import BASELINE_MODES, BUDGET_MODES, Scenario
from .oracle import InstanceTooLarge, ScenarioConfigError, optimal_assignment
from .sim import baseline_performance, budget_sweep, metrics, run
from .strategy import paired_utilities, shading_check

SWEEP_FRACTIONS = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.8, 1.0, 1.2, 1.5, 2.0)


class UsageError(Exception):
    pass


def _load(args) -> Scenario:
    if resolve_scenario_path(args.scenario) is None:
        raise UsageError(f"scenario not found: {args.scenario}")
    scenario = load_scenario(args.scenario)
    overrides = {}
    if getattr(args, "epsilon", None) is not None:
        overrides["epsilon"] = args.epsilon
    if getattr(args, "budget_mode", None):
        overrides["budget_mode"] = args.budget_mode
    if getattr(args, "baseline_mode", None):
        overrides["baseline_mode"] = args.baseline_mode
    if overrides:
        scenario = replace(scenario, auction=replace(scenario.auction, **overrides))
    return scenario


def _cmd_run(args) -> int:
    scenario = _load(args)
    if args.epsilon is not None and not args.epsilon > 0:
        raise UsageError("--epsilon must be positive")
    trace = run(scenario, args.horizon, args.seed)
    suffix = "csv" if args.format == "table" else "json"
    out = Path(args.out) if args.out else default_output_dir() / f"{scenario.name}_trace.{suffix}"
    write_trace(trace, out, args.format)
    rounds = [p.rounds for p in trace.periods if p.auctioned]
    print(f"scenario {scenario.name}: {len(trace.periods)} periods, "
          f"mean rounds {fmt(float(np.mean(rounds)) if rounds else 0.0)}")
    print(f"trace written to {out}")
    return 0


def _cmd_compare(args) -> int:
    scenario = _load(args)
    trace = run(scenario, args.horizon, args.seed)
    report = metrics(trace, baseline_performance(scenario, args.horizon))
    print(f"scenario {scenario.name}")
    print(f"{'allocator':<10} {'total':>10} {'normalized':>11} {'gain_pts':>10}")
    for name, total in report.totals.items():
        print(f"{name:<10} {fmt(total):>10} {fmt(report.normalized[name]):>11} "
              f"{fmt(report.gain_points[name]):>10}")
    print(f"improvement over static (gain points): {fmt(report.improvement_over_static)}")
    for aid, pct in report.per_app_improvement_pct.items():
        print(f"  {aid}: {fmt(pct)}% vs shared")
    print(f"mean rounds {fmt(report.mean_rounds)}, max rounds {report.max_rounds}, "
          f"revenue {fmt(report.revenue)}")
    conv = report.convergence_period
    print(f"converged at period {'never' if conv is None else conv}")
    if args.budget_sweep:
        print("budget  throughput")
        for frac, thr in budget_sweep(scenario, SWEEP_FRACTIONS, args.horizon, args.seed):
            print(f"{fmt(frac):>6}  {fmt(thr)}")
    return 0


def _cmd_verify(args) -> int:
    ok = True
    check = shading_check(args.n, args.m, args.v, args.samples, args.grid_step, args.seed)
    for label, passed, detail in (
        ("argmax", check.argmax_ok, f"argmax {fmt(check.argmax)} target {fmt(check.target)}"),
        ("curve", check.curve_ok, f"max deviation {fmt(check.max_z)} standard errors"),
    ):
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} best response {label} "
              f"(n={args.n}, m={args.m}, v={fmt(args.v)}): {detail}")
    if args.trials > 0:
        for mult in (0.5, 2.0):
            deltas, bounds = [], []
            for scenario in random_unique_instances(args.seed, args.trials):
                eps = scenario.default_epsilon()
                truthful, scaled = paired_utilities(scenario, scenario.app_ids[0], mult)
                deltas.append(scaled - truthful)
                bounds.append((eps * len(scenario.resources), 5 * eps))
            mean = math.fsum(deltas) / len(deltas)
            mean_ok = mean <= float(np.mean([b[0] for b in bounds]))
            worst = sum(d > b[1] for d, b in zip(deltas, bounds))
            passed = mean_ok and worst == 0
            ok &= passed
            print(f"{'PASS' if passed else 'FAIL'} truthfulness x{fmt(mult)}: mean delta "
                  f"{fmt(mean)}, {worst}/{len(deltas)} instances above 5*epsilon")
    return 1 if (args.strict and not ok) else 0


def _cmd_oracle(args) -> int:
    scenario = _load(args)
    matrix = scenario.valuation_matrix(args.time)
    assignment, total = optimal_assignment(matrix, scenario.resources)
    for aid in matrix:
        print(f"{aid}: {assignment.resource_of(aid) or '-'}")
    print(f"total {fmt(total)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="contend", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_args(p):
        p.add_argument("--scenario", required=True, help="bundled name or JSON path")
        p.add_argument("--horizon", type=int, default=None, help="periods to simulate")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--epsilon", type=float, default=None)
        p.add_argument("--budget-mode", choices=BUDGET_MODES, default=None)
        p.add_argument("--baseline-mode", choices=BASELINE_MODES, default=None)

    p = sub.add_parser("run", help="simulate and write a trace")
    scenario_args(p)
    p.add_argument("--out", default=None, help="trace file (default: output dir)")
    p.add_argument("--format", choices=("table", "document"), default="table")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("compare", help="compare against the baseline allocators")
    scenario_args(p)
    p.add_argument("--budget-sweep", action="store_true", help="also print throughput vs budget")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("verify", help="best-response and truthfulness checks")
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--v", type=float, default=0.8)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--grid-step", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=0, help="random instances for truthfulness probes")
    p.add_argument("--strict", action="store_true", help="exit 1 if any check fails")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("oracle", help="exact optimum of a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--time", type=int, default=0)
    p.set_defaults(func=_cmd_oracle)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"contend: error: {exc}", file=sys.stderr)
        return 2
    except (ScenarioParseError, ScenarioValidationError, ScenarioConfigError,
            InstanceTooLarge, AuctionError, ValueError, OSError) as exc:
        print(f"contend: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
