"""Command line interface.

Exit codes: 0 success, 2 bad configuration or input, 3 I/O or run failure,
4 insufficient data for the requested analysis.
"""
from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

from . import experiments, metrics
from .analysis import NormThresholds
from .bench import run_benchmark
from .config import ConfigError, SimConfig, load_config
from .engine import run_simulation
from .experiments import RunFailure, load_plan

EXIT_OK = 0
EXIT_BAD_CONFIG = 2
EXIT_IO = 3
EXIT_INSUFFICIENT_DATA = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="normsim",
        description="Evolutionary commons simulator with mood-modulated "
        "behaviour and peer sanctioning.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute one simulation run")
    run.add_argument("--config", help="JSON or TOML config file (defaults used if omitted)")
    run.add_argument("--seed", type=int, default=0, help="run seed (default 0)")
    run.add_argument("--out", default="out", help="output directory (default ./out)")
    run.add_argument("--snapshot-step", type=int, help="override snapshot step")
    run.add_argument(
        "--hunger-mode", choices=["prose", "literal"], help="hunger stimulus variant"
    )

    exp = sub.add_parser("experiment", help="execute a multi-condition plan")
    exp.add_argument("--plan", required=True, help="JSON or TOML plan file")
    exp.add_argument("--out", help="override the plan's output directory")
    exp.add_argument("--runs", type=int, help="override runs per condition")
    exp.add_argument(
        "--parallel",
        type=int,
        default=None,
        help="worker processes (default: plan value, or available cores via 0)",
    )
    exp.add_argument("--snapshot-step", type=int, help="snapshot used for analysis")
    exp.add_argument("--hunger-mode", choices=["prose", "literal"])
    exp.add_argument("--c1", type=float, default=None, help="convergence threshold")
    exp.add_argument("--c2", type=float, default=None, help="arbitrariness threshold")
    exp.add_argument(
        "--regulation-variance",
        type=float,
        default=70.0,
        help="population-variance split level (default 70)",
    )
    exp.add_argument("--quiet", action="store_true", help="suppress progress output")

    ana = sub.add_parser("analyze", help="recompute statistics over stored runs")
    ana.add_argument("--results", required=True, help="experiment output directory")
    ana.add_argument("--snapshot-step", type=int, help="snapshot used for analysis")
    ana.add_argument("--c1", type=float, default=None)
    ana.add_argument("--c2", type=float, default=None)
    ana.add_argument("--regulation-variance", type=float, default=70.0)

    bench = sub.add_parser("bench", help="compare numba and numpy backends")
    bench.add_argument("--agents", type=int, default=100)
    bench.add_argument("--steps", type=int, default=300)
    bench.add_argument("--seed", type=int, default=0)

    return parser


def _thresholds(args: argparse.Namespace) -> NormThresholds:
    defaults = NormThresholds()
    return NormThresholds(
        c1=defaults.c1 if args.c1 is None else args.c1,
        c2=defaults.c2 if args.c2 is None else args.c2,
    )


def _cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config) if args.config else SimConfig()
    overrides = {}
    if args.snapshot_step is not None:
        overrides["snapshot_step"] = args.snapshot_step
    if args.hunger_mode is not None:
        overrides["hunger_mode"] = args.hunger_mode
    if overrides:
        config = config.replace(**overrides)
    result = run_simulation(config, args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = experiments.run_paths(out_dir, args.seed)
    metrics.write_series_csv(result.step_series, csv_path)
    experiments._write_run_json(result, config, json_path)
    print(f"wrote {csv_path} and {json_path}", file=sys.stderr)
    return EXIT_OK


def _cmd_experiment(args: argparse.Namespace) -> int:
    plan = load_plan(args.plan)
    replacements = {}
    if args.runs is not None:
        replacements["runs_per_condition"] = args.runs
    if args.parallel is not None:
        workers = args.parallel if args.parallel > 0 else (os.cpu_count() or 1)
        replacements["workers"] = workers
    if args.out is not None:
        replacements["output_dir"] = args.out
    if args.hunger_mode is not None:
        replacements["base"] = plan.base.replace(hunger_mode=args.hunger_mode)
    if replacements:
        plan = dataclasses.replace(plan, **replacements)
    plan.validate()
    experiments.run_experiment(
        plan,
        thresholds=_thresholds(args),
        regulation_variance=args.regulation_variance,
        snapshot_t=args.snapshot_step,
        quiet=args.quiet,
    )
    return EXIT_OK


def _cmd_analyze(args: argparse.Namespace) -> int:
    summaries = experiments.analyze_experiment_dir(
        Path(args.results),
        thresholds=_thresholds(args),
        regulation_variance=args.regulation_variance,
        snapshot_t=args.snapshot_step,
    )
    if all(summary is None for summary in summaries.values()):
        print("insufficient data: no condition has enough surviving runs", file=sys.stderr)
        return EXIT_INSUFFICIENT_DATA
    return EXIT_OK


def _cmd_bench(args: argparse.Namespace) -> int:
    result = run_benchmark(n_agents=args.agents, n_steps=args.steps, seed=args.seed)
    print(result.report())
    return EXIT_OK if result.outputs_match else 1


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "experiment": _cmd_experiment,
        "analyze": _cmd_analyze,
        "bench": _cmd_bench,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except RunFailure as exc:
        print(f"run failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
