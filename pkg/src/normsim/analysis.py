"""Cross-run statistics: convergence/arbitrariness of traits, the norm
classification flowchart, trait correlation matrices, the population-regulation
split, and injection-window comparisons.

All statistics condition on surviving runs and use the population variance
convention throughout.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .agents import TRAIT_NAMES
from .config import InjectionConfig
from .metrics import RunResult, StepMetrics, TraitSnapshot

CLASS_NORM = "norm"
CLASS_SCAFFOLDING = "scaffolding/indirect"
CLASS_NO_REGULARITY = "no-regularity"
LABEL_NORM_SINGLE = "norm (single-variable)"
LABEL_NORM_MECHANISTIC = "norm (mechanistic member)"

# Variance of each stat's initialisation distribution: Uniform[0,1] -> 1/12,
# Uniform[-1,1] -> 1/3. Realised behaviours start at their [0,1] baselines.
BASELINE_VARIANCES: dict[str, float] = {
    **{name: 1.0 / 3.0 for name in TRAIT_NAMES[4:]},
    "bite_size_B": 1.0 / 12.0,
    "sanction_threshold_S": 1.0 / 12.0,
    "alpha": 1.0 / 12.0,
    "beta": 1.0 / 12.0,
    "mu_eat": 1.0 / 12.0,
    "mu_sanction": 1.0 / 12.0,
}

# The mechanism parameters: traits eligible for mechanistic-norm membership.
DISPOSITION_TRAITS = frozenset(TRAIT_NAMES[2:])
ANCHOR_TRAIT = "eat_mu_weight"
MECHANISTIC_R = 0.3


class InsufficientDataError(ValueError):
    """Raised when a statistic needs more surviving runs than provided."""


@dataclass(frozen=True)
class NormThresholds:
    """Classification cutoffs as fractions of the baseline variance:
    converged when mean_of_variance < c1 * baseline, arbitrary when
    variance_of_mean > c2 * baseline."""

    c1: float = 1.0
    c2: float = 0.25


def mean_of_variance(snapshots: Sequence[TraitSnapshot], trait: str) -> float:
    """Across runs, the mean of the within-run population variance
    (how converged populations are)."""
    values = _per_run(snapshots, trait, "variance")
    return float(np.mean(values))


def variance_of_mean(snapshots: Sequence[TraitSnapshot], trait: str) -> float:
    """Across runs, the variance of the within-run mean
    (how arbitrary the converged values are)."""
    values = _per_run(snapshots, trait, "mean")
    return float(np.var(values))


def _per_run(
    snapshots: Sequence[TraitSnapshot], trait: str, which: str
) -> np.ndarray:
    if len(snapshots) < 2:
        raise InsufficientDataError(
            f"need at least 2 surviving runs, got {len(snapshots)}"
        )
    return np.array([getattr(s, which)[trait] for s in snapshots])


def classify_norm(
    trait: str,
    mov: float,
    vom: float,
    baseline_variance: float,
    thresholds: NormThresholds = NormThresholds(),
) -> str:
    """Flowchart: converged and arbitrary -> norm; converged only ->
    scaffolding/indirect; otherwise no regularity."""
    converged = mov < thresholds.c1 * baseline_variance
    arbitrary = vom > thresholds.c2 * baseline_variance
    if converged and arbitrary:
        return CLASS_NORM
    if converged:
        return CLASS_SCAFFOLDING
    return CLASS_NO_REGULARITY


def pearson_r(x: np.ndarray, y: np.ndarray) -> float | None:
    """Pearson correlation; None when either column is degenerate or there
    are fewer than 3 points."""
    if len(x) < 3 or np.var(x) == 0.0 or np.var(y) == 0.0:
        return None
    r = float(np.corrcoef(x, y)[0, 1])
    return max(-1.0, min(1.0, r))


def correlation_matrix(
    table: np.ndarray, labels: Sequence[str]
) -> tuple[np.ndarray, list[str]]:
    """Pearson matrix over columns of a runs x stats table.

    Degenerate (zero-variance) columns yield NaN rows/columns and are listed
    separately; valid diagonal entries are exactly 1.
    """
    if table.shape[0] < 3:
        raise InsufficientDataError(
            f"need at least 3 surviving runs, got {table.shape[0]}"
        )
    n_cols = table.shape[1]
    variances = np.var(table, axis=0)
    valid = variances > 0.0
    matrix = np.full((n_cols, n_cols), np.nan)
    if valid.any():
        sub = np.corrcoef(table[:, valid], rowvar=False)
        sub = np.clip(np.atleast_2d(sub), -1.0, 1.0)
        np.fill_diagonal(sub, 1.0)
        idx = np.flatnonzero(valid)
        for a, ia in enumerate(idx):
            for b, ib in enumerate(idx):
                matrix[ia, ib] = sub[a, b]
    degenerate = [labels[i] for i in range(n_cols) if not valid[i]]
    return matrix, degenerate


@dataclass
class RegulationSplit:
    """Surviving runs partitioned by the variance of their population series."""

    variance_threshold: float
    regulated_seeds: tuple[int, ...]
    unregulated_seeds: tuple[int, ...]
    groups: dict[str, dict[str, Any] | None]

    def to_dict(self) -> dict[str, Any]:
        return {
            "variance_threshold": self.variance_threshold,
            "regulated_seeds": list(self.regulated_seeds),
            "unregulated_seeds": list(self.unregulated_seeds),
            "groups": self.groups,
        }


def regulation_split(
    results: Sequence[RunResult],
    variance_threshold: float = 70.0,
    snapshot_t: int | None = None,
) -> RegulationSplit:
    """Split surviving runs into regulated (population variance <= threshold)
    and unregulated, with per-group consumption statistics and the two focal
    trait correlations. Empty groups report None."""
    survivors = [r for r in results if r.survived]
    regulated = [r for r in survivors if r.population_variance <= variance_threshold]
    unregulated = [r for r in survivors if r.population_variance > variance_threshold]
    groups: dict[str, dict[str, Any] | None] = {}
    for name, group in (("regulated", regulated), ("unregulated", unregulated)):
        if not group:
            groups[name] = None
            continue
        t = snapshot_t if snapshot_t is not None else min(group[0].snapshots)
        d_array = np.array([r.snapshots[t].mean["d_array_weight"] for r in group])
        eat_mu = np.array([r.snapshots[t].mean["eat_mu_weight"] for r in group])
        sanction_mu = np.array(
            [r.snapshots[t].mean["sanction_mu_weight"] for r in group]
        )
        groups[name] = {
            "n_runs": len(group),
            "mean_energy_drain": float(
                np.mean([r.mean_energy_drain for r in group])
            ),
            "mean_total_energy_drain": float(
                np.mean([r.total_energy_drain for r in group])
            ),
            "mean_population": float(np.mean([r.mean_population for r in group])),
            "mean_sanction_damage": float(
                np.mean([r.mean_sanction_damage for r in group])
            ),
            "r_d_array_eat_mu": pearson_r(d_array, eat_mu),
            "r_sanction_mu_d_array": pearson_r(sanction_mu, d_array),
        }
    return RegulationSplit(
        variance_threshold=variance_threshold,
        regulated_seeds=tuple(r.run_seed for r in regulated),
        unregulated_seeds=tuple(r.run_seed for r in unregulated),
        groups=groups,
    )


@dataclass
class ExperimentSummary:
    """Cross-run statistics for one condition."""

    label: str
    n_runs: int
    n_survived: int
    snapshot_t: int
    thresholds: NormThresholds
    stat_names: tuple[str, ...]
    mean_of_variance: dict[str, float]
    variance_of_mean: dict[str, float]
    classification: dict[str, str]
    correlation_labels: tuple[str, ...] = ()
    correlation: np.ndarray | None = None
    correlation_degenerate: tuple[str, ...] = ()
    regulation: RegulationSplit | None = None
    injection: dict[str, Any] | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def survival_rate(self) -> float:
        return self.n_survived / self.n_runs if self.n_runs else 0.0

    def r(self, a: str, b: str) -> float | None:
        """Correlation between two stats, None if unavailable/degenerate."""
        if self.correlation is None:
            return None
        ia = self.correlation_labels.index(a)
        ib = self.correlation_labels.index(b)
        value = float(self.correlation[ia, ib])
        return None if math.isnan(value) else value

    def to_dict(self) -> dict[str, Any]:
        matrix: list[list[float | None]] | None = None
        if self.correlation is not None:
            matrix = [
                [None if math.isnan(v) else float(v) for v in row]
                for row in self.correlation
            ]
        return {
            "label": self.label,
            "n_runs": self.n_runs,
            "n_survived": self.n_survived,
            "survival_rate": self.survival_rate,
            "snapshot_t": self.snapshot_t,
            "thresholds": {"c1": self.thresholds.c1, "c2": self.thresholds.c2},
            "stat_names": list(self.stat_names),
            "mean_of_variance": self.mean_of_variance,
            "variance_of_mean": self.variance_of_mean,
            "classification": self.classification,
            "correlation_labels": list(self.correlation_labels),
            "correlation_matrix": matrix,
            "correlation_degenerate": list(self.correlation_degenerate),
            "regulation": self.regulation.to_dict() if self.regulation else None,
            "injection": self.injection,
            "extra": self.extra,
        }


def summarize_condition(
    results: Sequence[RunResult],
    label: str,
    snapshot_t: int | None = None,
    thresholds: NormThresholds = NormThresholds(),
    regulation_variance: float = 70.0,
) -> ExperimentSummary:
    """Full per-condition summary over surviving runs.

    Needs >= 2 survivors for the variance statistics; the correlation matrix
    additionally needs >= 3 and is omitted (None) below that.
    """
    survivors = [r for r in results if r.survived]
    if len(survivors) < 2:
        raise InsufficientDataError(
            f"condition {label!r}: need at least 2 surviving runs, "
            f"got {len(survivors)} of {len(results)}"
        )
    if snapshot_t is None:
        snapshot_t = min(survivors[0].snapshots)
    snapshots = [r.snapshots[snapshot_t] for r in survivors]
    names = tuple(snapshots[0].mean.keys())

    movs = {name: mean_of_variance(snapshots, name) for name in names}
    voms = {name: variance_of_mean(snapshots, name) for name in names}

    matrix = None
    degenerate: tuple[str, ...] = ()
    if len(survivors) >= 3:
        table = np.array([[s.mean[name] for name in names] for s in snapshots])
        matrix, degenerate_list = correlation_matrix(table, names)
        degenerate = tuple(degenerate_list)

    base = {
        name: classify_norm(name, movs[name], voms[name], BASELINE_VARIANCES[name], thresholds)
        for name in names
    }
    classification = dict(base)
    if matrix is not None:
        anchor_idx = names.index(ANCHOR_TRAIT)
        members = []
        for name in names:
            if name in DISPOSITION_TRAITS and name != ANCHOR_TRAIT and base[name] == CLASS_NORM:
                r = matrix[names.index(name), anchor_idx]
                if not math.isnan(r) and abs(r) >= MECHANISTIC_R:
                    members.append(name)
        for name in names:
            if base[name] == CLASS_NORM:
                classification[name] = LABEL_NORM_SINGLE
        for name in members:
            classification[name] = LABEL_NORM_MECHANISTIC
        if members and base[ANCHOR_TRAIT] == CLASS_NORM:
            classification[ANCHOR_TRAIT] = LABEL_NORM_MECHANISTIC
    else:
        for name in names:
            if base[name] == CLASS_NORM:
                classification[name] = LABEL_NORM_SINGLE

    regulation = regulation_split(survivors, regulation_variance, snapshot_t)
    return ExperimentSummary(
        label=label,
        n_runs=len(results),
        n_survived=len(survivors),
        snapshot_t=snapshot_t,
        thresholds=thresholds,
        stat_names=names,
        mean_of_variance=movs,
        variance_of_mean=voms,
        classification=classification,
        correlation_labels=names,
        correlation=matrix,
        correlation_degenerate=degenerate,
        regulation=regulation,
    )


# --- Injection windows ------------------------------------------------------


def injection_window_steps(injection: InjectionConfig, n_steps: int) -> list[int]:
    return [t for t in range(n_steps) if injection.active_at(t)]


def window_mean(series: Sequence[StepMetrics], steps: Iterable[int], name: str) -> float:
    values = [getattr(series[t], name) for t in steps if t < len(series)]
    if not values:
        return 0.0
    return float(np.mean(values))


def injection_comparison(
    baseline: Sequence[RunResult],
    injected: Sequence[RunResult],
    injection: InjectionConfig,
    fields: Sequence[str] = ("mu_eat_avg", "sanctions_issued"),
) -> dict[str, Any]:
    """Pair runs by seed and compare per-run means of each field over the
    injection windows. n_greater counts pairs where the injected run is
    strictly higher."""
    base_by_seed = {r.run_seed: r for r in baseline}
    pairs = [
        (base_by_seed[r.run_seed], r) for r in injected if r.run_seed in base_by_seed
    ]
    n_steps = max((len(r.step_series) for _, r in pairs), default=0)
    steps = injection_window_steps(injection, n_steps)
    report: dict[str, Any] = {"n_pairs": len(pairs), "window_steps": len(steps)}
    for name in fields:
        base_means = [window_mean(b.step_series, steps, name) for b, _ in pairs]
        inj_means = [window_mean(i.step_series, steps, name) for _, i in pairs]
        report[name] = {
            "baseline_mean": float(np.mean(base_means)) if pairs else 0.0,
            "injected_mean": float(np.mean(inj_means)) if pairs else 0.0,
            "n_greater": int(
                sum(1 for b, i in zip(base_means, inj_means) if i > b)
            ),
        }
    return report


# --- Report tables ----------------------------------------------------------


def write_table2_csv(summary: ExperimentSummary, path: str | Path) -> None:
    """Per-trait convergence/arbitrariness table (rows = traits)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trait", "mean_of_variance", "variance_of_mean", "classification"])
        for name in summary.stat_names:
            writer.writerow(
                [
                    name,
                    repr(summary.mean_of_variance[name]),
                    repr(summary.variance_of_mean[name]),
                    summary.classification[name],
                ]
            )


SWEEP_COLUMNS = (
    "label",
    "sanction_damage_D",
    "n_runs",
    "n_survived",
    "survival_rate",
    "r_d_array_eat_mu",
    "r_sanction_mu_d_array",
    "r_hunger_d_array",
    "eat_mu_mean_of_variance",
    "eat_mu_variance_of_mean",
)


def sweep_row(summary: ExperimentSummary, sanction_damage_D: float) -> dict[str, Any]:
    return {
        "label": summary.label,
        "sanction_damage_D": sanction_damage_D,
        "n_runs": summary.n_runs,
        "n_survived": summary.n_survived,
        "survival_rate": summary.survival_rate,
        "r_d_array_eat_mu": summary.r("d_array_weight", "eat_mu_weight"),
        "r_sanction_mu_d_array": summary.r("sanction_mu_weight", "d_array_weight"),
        "r_hunger_d_array": summary.r("hunger_weight", "d_array_weight"),
        "eat_mu_mean_of_variance": summary.mean_of_variance["mu_eat"],
        "eat_mu_variance_of_mean": summary.variance_of_mean["mu_eat"],
    }


def write_sweep_csv(rows: Sequence[dict[str, Any]], path: str | Path) -> None:
    """One row per condition, Table-3 style statistics as columns."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            cells = []
            for col in SWEEP_COLUMNS:
                value = row.get(col)
                if value is None:
                    cells.append("")
                elif isinstance(value, float):
                    cells.append(repr(value))
                else:
                    cells.append(str(value))
            writer.writerow(cells)
