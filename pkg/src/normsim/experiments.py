"""Batch orchestration: N seeded runs per condition, sweeps, mood injection.

Output tree:
    out/<label>/condition.json   condition config + pairing metadata
    out/<label>/run_NNNNN.csv    per-step series
    out/<label>/run_NNNNN.json   run summary (config, snapshots, aggregates)
    out/<label>/summary.json     cross-run condition summary
    out/<label>/table2.csv       per-trait convergence/arbitrariness table
    out/sweep.csv                one row per condition

Summaries contain no timestamps and sort all keys, so identical plans produce
byte-identical outputs in any worker order.
"""
from __future__ import annotations

import json
import re
import sys
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import analysis, metrics
from .analysis import InsufficientDataError, NormThresholds
from .config import ConfigError, SimConfig
from .engine import run_simulation

_LABEL_RE = re.compile(r"^[A-Za-z0-9._-]+$")


class RunFailure(RuntimeError):
    """A run failed twice; the message identifies condition and seed."""


@dataclass(frozen=True)
class Condition:
    """One sweep cell: a label plus config overrides. injection_baseline
    names another condition whose runs serve as the non-injected pair."""

    label: str
    overrides: dict[str, Any] = field(default_factory=dict)
    injection_baseline: str | None = None


@dataclass(frozen=True)
class ExperimentPlan:
    base: SimConfig
    conditions: tuple[Condition, ...]
    runs_per_condition: int = 200
    output_dir: str = "out"
    workers: int = 1

    def validate(self) -> None:
        if self.runs_per_condition < 1:
            raise ConfigError(
                f"runs_per_condition must be >= 1, got {self.runs_per_condition}"
            )
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if not self.conditions:
            raise ConfigError("plan needs at least one condition")
        labels = [c.label for c in self.conditions]
        if len(set(labels)) != len(labels):
            dupes = sorted({l for l in labels if labels.count(l) > 1})
            raise ConfigError(f"duplicate condition labels: {dupes}")
        for condition in self.conditions:
            if not _LABEL_RE.match(condition.label):
                raise ConfigError(
                    f"condition label {condition.label!r} must match {_LABEL_RE.pattern}"
                )
            if condition.injection_baseline is not None:
                if condition.injection_baseline not in labels:
                    raise ConfigError(
                        f"injection_baseline {condition.injection_baseline!r} "
                        "names no condition in the plan"
                    )
                if condition.injection_baseline == condition.label:
                    raise ConfigError(
                        f"condition {condition.label!r} cannot pair with itself"
                    )
            self.condition_config(condition)  # validates overrides

    def condition_config(self, condition: Condition) -> SimConfig:
        return self.base.replace(**condition.overrides)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentPlan":
        data = dict(data)
        unknown = set(data) - {
            "base", "conditions", "runs_per_condition", "output_dir", "workers",
        }
        if unknown:
            raise ConfigError(f"unknown plan fields: {sorted(unknown)}")
        base = SimConfig.from_dict(data.get("base", {}))
        raw_conditions = data.get("conditions", [])
        conditions = []
        for raw in raw_conditions:
            extra = set(raw) - {"label", "overrides", "injection_baseline"}
            if extra:
                raise ConfigError(f"unknown condition fields: {sorted(extra)}")
            if "label" not in raw:
                raise ConfigError("every condition needs a label")
            conditions.append(
                Condition(
                    label=str(raw["label"]),
                    overrides=dict(raw.get("overrides", {})),
                    injection_baseline=raw.get("injection_baseline"),
                )
            )
        plan = cls(
            base=base,
            conditions=tuple(conditions),
            runs_per_condition=int(data.get("runs_per_condition", 200)),
            output_dir=str(data.get("output_dir", "out")),
            workers=int(data.get("workers", 1)),
        )
        plan.validate()
        return plan


def load_plan(path: str | Path) -> ExperimentPlan:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read plan file {path}: {exc}") from exc
    if path.suffix == ".toml":
        import tomli

        try:
            data = tomli.loads(raw.decode())
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    else:
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"plan file {path} must hold a table/object")
    return ExperimentPlan.from_dict(data)


@dataclass
class RunRecord:
    """What the analysis needs from one run, without the step series."""

    run_seed: int
    survived: bool
    population_variance: float
    snapshots: dict[int, metrics.TraitSnapshot]
    mean_energy_drain: float
    total_energy_drain: float
    mean_population: float
    mean_sanction_damage: float

    @classmethod
    def from_result(cls, result: metrics.RunResult) -> "RunRecord":
        return cls(
            run_seed=result.run_seed,
            survived=result.survived,
            population_variance=result.population_variance,
            snapshots=result.snapshots,
            mean_energy_drain=result.mean_energy_drain,
            total_energy_drain=result.total_energy_drain,
            mean_population=result.mean_population,
            mean_sanction_damage=result.mean_sanction_damage,
        )

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> "RunRecord":
        aggregates = data["aggregates"]
        return cls(
            run_seed=int(data["run_seed"]),
            survived=bool(data["survived"]),
            population_variance=float(data["population_variance"]),
            snapshots={
                int(t): metrics.TraitSnapshot.from_dict(s)
                for t, s in data["snapshots"].items()
            },
            mean_energy_drain=float(aggregates["mean_energy_drain"]),
            total_energy_drain=float(aggregates["total_energy_drain"]),
            mean_population=float(aggregates["mean_population"]),
            mean_sanction_damage=float(aggregates["mean_sanction_damage"]),
        )


def run_paths(condition_dir: Path, seed: int) -> tuple[Path, Path]:
    return (
        condition_dir / f"run_{seed:05d}.csv",
        condition_dir / f"run_{seed:05d}.json",
    )


def execute_run(
    config: SimConfig, seed: int, condition_dir: str | Path, label: str
) -> RunRecord:
    """Simulate one run, write its file pair, return the lite record.
    A failure is retried once with identical inputs before giving up."""
    condition_dir = Path(condition_dir)
    last_error: Exception | None = None
    for _ in range(2):
        try:
            result = run_simulation(config, seed)
            csv_path, json_path = run_paths(condition_dir, seed)
            metrics.write_series_csv(result.step_series, csv_path)
            _write_run_json(result, config, json_path)
            return RunRecord.from_result(result)
        except Exception as exc:  # noqa: BLE001 - retry boundary
            last_error = exc
    raise RunFailure(f"run {label}/{seed} failed twice: {last_error!r}")


def _write_run_json(
    result: metrics.RunResult, config: SimConfig, path: Path
) -> None:
    payload = metrics.run_summary_dict(result)
    payload["config"] = config.to_dict()
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_condition_records(
    condition_dir: str | Path,
) -> tuple[list[RunRecord], dict[str, Any] | None]:
    """Read every run_*.json (sorted by seed) plus the stored config dict."""
    condition_dir = Path(condition_dir)
    records = []
    config_dict: dict[str, Any] | None = None
    for path in sorted(condition_dir.glob("run_*.json")):
        with open(path) as fh:
            data = json.load(fh)
        records.append(RunRecord.from_json_dict(data))
        if config_dict is None:
            config_dict = data.get("config")
    return records, config_dict


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def run_experiment(
    plan: ExperimentPlan,
    out_dir: str | Path | None = None,
    thresholds: NormThresholds = NormThresholds(),
    regulation_variance: float = 70.0,
    snapshot_t: int | None = None,
    quiet: bool = False,
) -> dict[str, analysis.ExperimentSummary | None]:
    """Run every condition, write the output tree, return the summaries
    (None for conditions with too few survivors to analyse)."""
    plan.validate()
    root = Path(out_dir) if out_dir is not None else Path(plan.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    total_runs = len(plan.conditions) * plan.runs_per_condition
    done = 0
    records_by_label: dict[str, list[RunRecord]] = {}

    for condition in plan.conditions:
        config = plan.condition_config(condition)
        condition_dir = root / condition.label
        condition_dir.mkdir(parents=True, exist_ok=True)
        with open(condition_dir / "condition.json", "w") as fh:
            json.dump(
                {
                    "label": condition.label,
                    "injection_baseline": condition.injection_baseline,
                    "config": config.to_dict(),
                },
                fh,
                sort_keys=True,
                indent=1,
            )
            fh.write("\n")
        seeds = range(plan.runs_per_condition)
        records: list[RunRecord] = []
        if plan.workers <= 1:
            for seed in seeds:
                records.append(execute_run(config, seed, condition_dir, condition.label))
                done += 1
                if not quiet:
                    _progress(f"{condition.label}: {done}/{total_runs} runs")
        else:
            with ProcessPoolExecutor(max_workers=plan.workers) as pool:
                futures = {
                    pool.submit(
                        execute_run, config, seed, str(condition_dir), condition.label
                    ): seed
                    for seed in seeds
                }
                by_seed: dict[int, RunRecord] = {}
                for future in as_completed(futures):
                    by_seed[futures[future]] = future.result()
                    done += 1
                    if not quiet:
                        _progress(f"{condition.label}: {done}/{total_runs} runs")
            records = [by_seed[s] for s in sorted(by_seed)]
        records_by_label[condition.label] = records

    return analyze_experiment_dir(
        root,
        plan=plan,
        records_by_label=records_by_label,
        thresholds=thresholds,
        regulation_variance=regulation_variance,
        snapshot_t=snapshot_t,
    )


def _condition_meta(condition_dir: Path) -> dict[str, Any] | None:
    meta_path = condition_dir / "condition.json"
    if not meta_path.exists():
        return None
    with open(meta_path) as fh:
        return json.load(fh)


def analyze_experiment_dir(
    root: str | Path,
    plan: ExperimentPlan | None = None,
    records_by_label: dict[str, list[RunRecord]] | None = None,
    thresholds: NormThresholds = NormThresholds(),
    regulation_variance: float = 70.0,
    snapshot_t: int | None = None,
) -> dict[str, analysis.ExperimentSummary | None]:
    """(Re)compute summaries, tables and the sweep for an output tree.
    Works from disk alone; passing fresh in-memory records skips re-reading."""
    root = Path(root)
    if records_by_label is not None:
        labels = list(records_by_label)
    else:
        labels = sorted(
            p.parent.name for p in root.glob("*/condition.json")
        ) or sorted({p.parent.name for p in root.glob("*/run_*.json")})
        if not labels and list(root.glob("run_*.json")):
            labels = ["."]
    if not labels:
        raise ConfigError(f"no run results under {root}")

    summaries: dict[str, analysis.ExperimentSummary | None] = {}
    sweep_rows = []
    configs: dict[str, dict[str, Any] | None] = {}
    metas: dict[str, dict[str, Any] | None] = {}
    for label in labels:
        condition_dir = root / label
        meta = _condition_meta(condition_dir)
        metas[label] = meta
        if records_by_label is not None:
            records = records_by_label[label]
            config_dict = meta["config"] if meta else None
        else:
            records, config_dict = load_condition_records(condition_dir)
            if meta and config_dict is None:
                config_dict = meta.get("config")
        if not records:
            raise ConfigError(f"no run results under {condition_dir}")
        configs[label] = config_dict
        display = label if label != "." else root.name
        try:
            summary = analysis.summarize_condition(
                records,
                display,
                snapshot_t=snapshot_t,
                thresholds=thresholds,
                regulation_variance=regulation_variance,
            )
        except InsufficientDataError as exc:
            summary = None
            _write_json(
                condition_dir / "summary.json",
                {
                    "label": display,
                    "n_runs": len(records),
                    "n_survived": sum(1 for r in records if r.survived),
                    "error": f"insufficient-data: {exc}",
                },
            )
        summaries[label] = summary
        damage = (config_dict or {}).get("sanction_damage_D")
        if summary is not None:
            row = analysis.sweep_row(summary, damage)
        else:
            survived = sum(1 for r in records if r.survived)
            row = {
                "label": display,
                "sanction_damage_D": damage,
                "n_runs": len(records),
                "n_survived": survived,
                "survival_rate": survived / len(records),
            }
        sweep_rows.append(row)

    # Injection pairing declared in condition metadata.
    for label in labels:
        meta = metas[label]
        summary = summaries[label]
        if not meta or summary is None:
            continue
        baseline_label = meta.get("injection_baseline")
        config_dict = configs[label]
        if not baseline_label or baseline_label not in labels or not config_dict:
            continue
        injection_dict = config_dict.get("injection")
        if injection_dict is None:
            continue
        summary.injection = _disk_injection_comparison(
            root / baseline_label,
            root / label,
            injection=injection_dict,
            n_steps=int(config_dict["n_steps"]),
        )

    for label in labels:
        summary = summaries[label]
        if summary is None:
            continue
        _write_json(root / label / "summary.json", summary.to_dict())
        analysis.write_table2_csv(summary, root / label / "table2.csv")
    analysis.write_sweep_csv(sweep_rows, root / "sweep.csv")
    return summaries


def _write_json(path: Path, payload: dict[str, Any]) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _disk_injection_comparison(
    baseline_dir: Path,
    injected_dir: Path,
    injection: dict[str, Any],
    n_steps: int,
    fields: Sequence[str] = ("mu_eat_avg", "sanctions_issued"),
) -> dict[str, Any]:
    """Streaming version of analysis.injection_comparison: pairs runs by seed
    (baseline survivors only) and reads one series at a time."""
    from .config import InjectionConfig

    injection_cfg = InjectionConfig.from_dict(injection)
    steps = analysis.injection_window_steps(injection_cfg, n_steps)
    base_records, _ = load_condition_records(baseline_dir)
    inj_records, _ = load_condition_records(injected_dir)
    base_alive = {r.run_seed for r in base_records if r.survived}
    inj_seeds = {r.run_seed for r in inj_records}
    seeds = sorted(base_alive & inj_seeds)
    means: dict[str, tuple[list[float], list[float]]] = {
        name: ([], []) for name in fields
    }
    for seed in seeds:
        base_series = metrics.read_series_csv(run_paths(baseline_dir, seed)[0])
        inj_series = metrics.read_series_csv(run_paths(injected_dir, seed)[0])
        for name in fields:
            means[name][0].append(analysis.window_mean(base_series, steps, name))
            means[name][1].append(analysis.window_mean(inj_series, steps, name))
    report: dict[str, Any] = {"n_pairs": len(seeds), "window_steps": len(steps)}
    for name in fields:
        base_means, inj_means = means[name]
        report[name] = {
            "baseline_mean": float(np.mean(base_means)) if seeds else 0.0,
            "injected_mean": float(np.mean(inj_means)) if seeds else 0.0,
            "n_greater": int(
                sum(1 for b, i in zip(base_means, inj_means) if i > b)
            ),
        }
    return report
