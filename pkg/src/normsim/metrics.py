"""Per-step population metrics, trait snapshots, and run-level outputs.

All variances use the population (divide-by-N) convention. Files round-trip
exactly: floats are written with repr so reading a CSV/JSON pair reproduces
the in-memory RunResult bit for bit.
"""
from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np

from .agents import BEHAVIOUR_NAMES, TRAIT_NAMES, WorldState

if TYPE_CHECKING:  # avoid a metrics -> engine import cycle
    from .engine import RoundLedger


@dataclass(frozen=True)
class StepMetrics:
    """One row of the per-run series. population_zero marks rows where the
    round ended with nobody alive (averages recorded as 0)."""

    t: int
    population: int
    avg_wellbeing: float
    hunger_avg: float
    injuries_from_sanction_avg: float
    energy_drain: float
    resource_level: float
    births: int
    deaths: int
    deaths_energy: int
    deaths_random: int
    sanctions_issued: int
    mu_eat_avg: float
    mu_sanction_avg: float
    n_actors: int
    population_zero: bool


STEP_FIELDS = tuple(f.name for f in dataclasses.fields(StepMetrics))
_INT_FIELDS = {
    "t", "population", "births", "deaths", "deaths_energy", "deaths_random",
    "sanctions_issued", "n_actors",
}


def _stat_order(stats: dict[str, float]) -> dict[str, float]:
    ordered = {k: stats[k] for k in ALL_STAT_NAMES if k in stats}
    ordered.update((k, v) for k, v in stats.items() if k not in ordered)
    return ordered


@dataclass(frozen=True)
class TraitSnapshot:
    """Population mean/variance per trait and realised behaviour at step t.

    mu_sanction is present only when social maintenance is on; an extinct
    population gives an empty snapshot.
    """

    t: int
    population: int
    empty: bool
    mean: dict[str, float] = field(default_factory=dict)
    variance: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "t": self.t,
            "population": self.population,
            "empty": self.empty,
            "mean": self.mean,
            "variance": self.variance,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TraitSnapshot":
        # key order in stored files is arbitrary; restore the canonical one
        return cls(
            t=int(data["t"]),
            population=int(data["population"]),
            empty=bool(data["empty"]),
            mean=_stat_order({k: float(v) for k, v in data["mean"].items()}),
            variance=_stat_order(
                {k: float(v) for k, v in data["variance"].items()}
            ),
        )


@dataclass
class RunResult:
    """Everything one run produces."""

    config_fingerprint: str
    run_seed: int
    step_series: list[StepMetrics]
    snapshots: dict[int, TraitSnapshot]
    survived: bool
    population_variance: float

    @property
    def mean_energy_drain(self) -> float:
        if not self.step_series:
            return 0.0
        total = 0.0
        for row in self.step_series:
            total += row.energy_drain
        return total / len(self.step_series)

    @property
    def total_energy_drain(self) -> float:
        total = 0.0
        for row in self.step_series:
            total += row.energy_drain
        return total

    @property
    def mean_population(self) -> float:
        if not self.step_series:
            return 0.0
        return sum(row.population for row in self.step_series) / len(self.step_series)

    @property
    def mean_sanction_damage(self) -> float:
        if not self.step_series:
            return 0.0
        total = 0.0
        for row in self.step_series:
            total += row.injuries_from_sanction_avg * row.n_actors
        return total / len(self.step_series)


def record_step(world: WorldState, ledger: "RoundLedger") -> StepMetrics:
    """Fold one round's ledger plus the post-round world into a metrics row."""
    population = world.n_alive
    actors = ledger.n_actors
    return StepMetrics(
        t=ledger.t,
        population=population,
        avg_wellbeing=ledger.energy_sum_end / population if population else 0.0,
        hunger_avg=ledger.hunger_sum / actors if actors else 0.0,
        injuries_from_sanction_avg=(
            ledger.sanction_damage_total / actors if actors else 0.0
        ),
        energy_drain=ledger.energy_drain,
        resource_level=world.resource,
        births=ledger.births,
        deaths=ledger.deaths_energy + ledger.deaths_random,
        deaths_energy=ledger.deaths_energy,
        deaths_random=ledger.deaths_random,
        sanctions_issued=ledger.sanctions_issued,
        mu_eat_avg=ledger.mu_eat_sum / actors if actors else 0.0,
        mu_sanction_avg=ledger.mu_sanction_sum / actors if actors else 0.0,
        n_actors=actors,
        population_zero=population == 0,
    )


def snapshot_traits(
    world: WorldState, t: int, include_sanction: bool = True
) -> TraitSnapshot:
    """Mean and population variance of the 14 traits plus the behaviours
    realised on each agent's most recent turn."""
    n = world.n_alive
    if n == 0:
        return TraitSnapshot(t=t, population=0, empty=True)
    mean: dict[str, float] = {}
    variance: dict[str, float] = {}
    for col, name in enumerate(TRAIT_NAMES):
        column = world.genomes[:n, col]
        mean[name] = float(np.mean(column))
        variance[name] = float(np.var(column))
    behaviours = {"mu_eat": world.mu_eat_prev[:n]}
    if include_sanction:
        behaviours["mu_sanction"] = world.mu_sanction_prev[:n]
    for name, column in behaviours.items():
        mean[name] = float(np.mean(column))
        variance[name] = float(np.var(column))
    return TraitSnapshot(t=t, population=n, empty=False, mean=mean, variance=variance)


# --- File formats -----------------------------------------------------------


def _format_cell(name: str, value: Any) -> str:
    if name == "population_zero":
        return "1" if value else "0"
    if name in _INT_FIELDS:
        return str(int(value))
    return repr(float(value))


def write_series_csv(series: list[StepMetrics], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(STEP_FIELDS)
        for row in series:
            writer.writerow(
                [_format_cell(name, getattr(row, name)) for name in STEP_FIELDS]
            )


def read_series_csv(path: str | Path) -> list[StepMetrics]:
    series: list[StepMetrics] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != STEP_FIELDS:
            raise ValueError(f"unexpected columns in {path}")
        for record in reader:
            kwargs: dict[str, Any] = {}
            for name in STEP_FIELDS:
                if name == "population_zero":
                    kwargs[name] = record[name] == "1"
                elif name in _INT_FIELDS:
                    kwargs[name] = int(record[name])
                else:
                    kwargs[name] = float(record[name])
            series.append(StepMetrics(**kwargs))
    return series


def run_summary_dict(result: RunResult) -> dict[str, Any]:
    return {
        "config_fingerprint": result.config_fingerprint,
        "run_seed": result.run_seed,
        "n_steps": len(result.step_series),
        "survived": result.survived,
        "population_variance": result.population_variance,
        "aggregates": {
            "mean_energy_drain": result.mean_energy_drain,
            "total_energy_drain": result.total_energy_drain,
            "mean_population": result.mean_population,
            "mean_sanction_damage": result.mean_sanction_damage,
        },
        "snapshots": {str(t): s.to_dict() for t, s in sorted(result.snapshots.items())},
    }


def write_run_json(result: RunResult, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(run_summary_dict(result), fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_run_result(csv_path: str | Path, json_path: str | Path) -> RunResult:
    """Rebuild a RunResult from its file pair (exact round-trip)."""
    with open(json_path) as fh:
        summary = json.load(fh)
    series = read_series_csv(csv_path)
    if len(series) != int(summary["n_steps"]):
        raise ValueError(f"series length mismatch between {csv_path} and {json_path}")
    snapshots = {
        int(t): TraitSnapshot.from_dict(s) for t, s in summary["snapshots"].items()
    }
    return RunResult(
        config_fingerprint=summary["config_fingerprint"],
        run_seed=int(summary["run_seed"]),
        step_series=series,
        snapshots=snapshots,
        survived=bool(summary["survived"]),
        population_variance=float(summary["population_variance"]),
    )


ALL_STAT_NAMES: tuple[str, ...] = TRAIT_NAMES + BEHAVIOUR_NAMES
