"""Simulation configuration: validation, file loading, fingerprinting."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    """Raised when a configuration violates a documented bound."""


@dataclass(frozen=True)
class InjectionConfig:
    """Periodic mood-injection protocol.

    Every `period` steps a window of `duration` steps opens during which each
    agent receives an extra mood impulse of `magnitude`, signed by that
    agent's taste for its own energy trend (see the engine). The first window
    starts at t = period, so early behaviour is untouched.
    """

    period: int = 500
    duration: int = 200
    magnitude: float = 200.0

    def validate(self) -> None:
        if self.period <= 0:
            raise ConfigError(f"injection.period must be > 0, got {self.period}")
        if not 0 <= self.duration <= self.period:
            raise ConfigError(
                f"injection.duration must be in [0, period], got {self.duration}"
            )
        if self.magnitude < 0:
            raise ConfigError(
                f"injection.magnitude must be >= 0, got {self.magnitude}"
            )

    def active_at(self, t: int) -> bool:
        """True when step t falls inside an injection window."""
        return t >= self.period and t % self.period < self.duration

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "InjectionConfig":
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown injection fields: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class SimConfig:
    """All knobs for one simulation run. Frozen so a run cannot drift."""

    n_agents_initial: int = 100
    resource_initial: float = 1000.0
    n_steps: int = 2000
    sanction_damage_D: float = 0.6
    sanction_cost_factor: float = 0.1
    reproduction_threshold: float = 10.0
    metabolism: float = 0.1
    mutation_rate: float = 0.1
    mutation_sd: float = 1.0
    random_death_rate: float = 0.01
    observation_window: int = 10
    d_array_window: int = 10
    growth_mean: float = 10.0
    growth_peak: float = 20.0
    growth_trough: float = 0.0
    growth_period: int = 200
    social_maintenance: bool = True
    hunger_mode: str = "prose"
    master_seed: int = 0
    snapshot_step: int = 1000
    injection: InjectionConfig | None = None

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.n_agents_initial < 0:
            raise ConfigError(
                f"n_agents_initial must be >= 0, got {self.n_agents_initial}"
            )
        if self.resource_initial < 0:
            raise ConfigError(
                f"resource_initial must be >= 0, got {self.resource_initial}"
            )
        if self.n_steps < 0:
            raise ConfigError(f"n_steps must be >= 0, got {self.n_steps}")
        for name in ("sanction_cost_factor", "mutation_rate", "random_death_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {value}")
        for name in (
            "sanction_damage_D",
            "reproduction_threshold",
            "metabolism",
            "mutation_sd",
        ):
            value = getattr(self, name)
            if value < 0:
                raise ConfigError(f"{name} must be >= 0, got {value}")
        if self.observation_window < 0:
            raise ConfigError(
                f"observation_window must be >= 0, got {self.observation_window}"
            )
        if self.d_array_window < 1:
            raise ConfigError(
                f"d_array_window must be >= 1, got {self.d_array_window}"
            )
        if not self.growth_trough <= self.growth_mean <= self.growth_peak:
            raise ConfigError(
                "growth levels must satisfy trough <= mean <= peak, got "
                f"{self.growth_trough}, {self.growth_mean}, {self.growth_peak}"
            )
        if self.growth_period <= 0:
            raise ConfigError(f"growth_period must be > 0, got {self.growth_period}")
        if self.hunger_mode not in ("prose", "literal"):
            raise ConfigError(
                f"hunger_mode must be 'prose' or 'literal', got {self.hunger_mode!r}"
            )
        if self.master_seed < 0:
            raise ConfigError(f"master_seed must be >= 0, got {self.master_seed}")
        if not 0 <= self.snapshot_step <= self.n_steps:
            raise ConfigError(
                f"snapshot_step must be in [0, n_steps], got {self.snapshot_step}"
            )
        if self.injection is not None:
            self.injection.validate()

    def replace(self, **overrides: Any) -> "SimConfig":
        """Copy with fields overridden; the copy is re-validated."""
        if "injection" in overrides and isinstance(overrides["injection"], dict):
            overrides["injection"] = InjectionConfig.from_dict(overrides["injection"])
        try:
            return dataclasses.replace(self, **overrides)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict[str, Any]:
        data = dataclasses.asdict(self)
        if self.injection is not None:
            data["injection"] = self.injection.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SimConfig":
        data = dict(data)
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        if data.get("injection") is not None and isinstance(data["injection"], dict):
            data["injection"] = InjectionConfig.from_dict(data["injection"])
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def fingerprint(self) -> str:
        """Stable hex digest of the full configuration."""
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]


def load_config(path: str | Path) -> SimConfig:
    """Load a SimConfig from a .json or .toml file."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
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
        raise ConfigError(f"config file {path} must hold a table/object")
    return SimConfig.from_dict(data)
