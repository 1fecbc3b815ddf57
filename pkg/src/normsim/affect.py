"""Stimulus computation and the mood pipeline.

Per turn: stimuli are weighted into a mood change, mood decays toward 0, and
the updated mood shifts the agent's consumption and sanctioning behaviours
away from their genetic baselines.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .agents import MU_EAT_MAX, AgentState, Genome

STIMULUS_NAMES: tuple[str, ...] = (
    "hunger",
    "injured",
    "others_near_death",
    "others_near_birth",
    "others_being_punished",
    "d_array",
    "others_violations",
    "dummy",
)

# Observed-agent thresholds for the social stimuli.
NEAR_DEATH_ENERGY = 1.0


@dataclass(frozen=True)
class StimulusVector:
    """The eight sensed values feeding the mood update."""

    hunger: float
    injured: float
    others_near_death: float
    others_near_birth: float
    others_being_punished: float
    d_array: float
    others_violations: float
    dummy: float

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in STIMULUS_NAMES])


@dataclass(frozen=True)
class ObservationContext:
    """What the focal agent sees: (consumed, sanction_loss, energy) per
    observed agent, at most observation_window entries."""

    observed: tuple[tuple[float, float, float], ...] = ()

    def __len__(self) -> int:
        return len(self.observed)


def compute_stimuli(
    agent: AgentState,
    ctx: ObservationContext,
    mu_eat_prev: float,
    rng: np.random.Generator,
    *,
    near_birth_energy: float = 10.0,
    hunger_mode: str = "prose",
    resource: float = 0.0,
) -> StimulusVector:
    """Sense the world from one agent's point of view.

    Empty windows give zero for every social stimulus. hunger_mode "prose" is
    unfulfilled consumption, max(0, mu_eat_prev - last_consumed); "literal"
    is resource - mu_eat_prev against the current pool. The violation check
    uses the agent's sanction behaviour from its previous turn.
    """
    n_obs = len(ctx)
    near_death = 0
    near_birth = 0
    violations = 0
    punished_sum = 0.0
    for consumed, sanction_loss, energy in ctx.observed:
        if energy < NEAR_DEATH_ENERGY:
            near_death += 1
        if energy > near_birth_energy:
            near_birth += 1
        punished_sum += sanction_loss
        if consumed > agent.mu_sanction_prev:
            violations += 1
    history = agent.energy_delta_history
    if history:
        total = 0.0
        for value in history:
            total += value
        d_array = total / len(history)
    else:
        d_array = 0.0
    if hunger_mode == "literal":
        hunger = resource - mu_eat_prev
    else:
        hunger = max(0.0, mu_eat_prev - agent.last_consumed)
    return StimulusVector(
        hunger=hunger,
        injured=agent.last_sanction_loss,
        others_near_death=near_death / n_obs if n_obs else 0.0,
        others_near_birth=near_birth / n_obs if n_obs else 0.0,
        others_being_punished=punished_sum,
        d_array=d_array,
        others_violations=violations / n_obs if n_obs else 0.0,
        dummy=rng.random(),
    )


def mood_delta(stimuli: StimulusVector, genome: Genome) -> float:
    """Weighted sum of stimuli, accumulated in fixed stimulus order."""
    delta = stimuli.hunger * genome.hunger_weight
    delta += stimuli.injured * genome.injured_weight
    delta += stimuli.others_near_death * genome.others_near_death_weight
    delta += stimuli.others_near_birth * genome.others_near_birth_weight
    delta += stimuli.others_being_punished * genome.others_being_punished_weight
    delta += stimuli.d_array * genome.d_array_weight
    delta += stimuli.others_violations * genome.others_violations_weight
    delta += stimuli.dummy * genome.dummy_weight
    return delta


def update_mood(mood_prev: float, delta: float, alpha: float, beta: float) -> float:
    """Mix the change in at rate alpha, then decay everything by beta."""
    return (mood_prev + delta * alpha) * beta


def apply_injection(mood: float, d_array_weight: float, magnitude: float) -> float:
    """Add an external mood impulse, signed so the agent reads it as positive
    (weight 0 ties break positive)."""
    return mood + (magnitude if d_array_weight >= 0.0 else -magnitude)


def modulate_behaviour(genome: Genome, mood: float) -> tuple[float, float]:
    """Mood-shifted behaviours: mu_eat clipped to [0, MU_EAT_MAX], mu_sanction
    floored at 0.

    The appetite ceiling is what makes the commons contestable: an agent can
    want at most one and a half units per turn, so a sanction of D is a real
    deterrent rather than a rounding error against an unbounded appetite. It
    also bounds the hunger stimulus (unfulfilled desire) to the same scale as
    the other stimuli, which keeps the mood feedback loop from running away.
    The tolerance threshold keeps only a floor: consumption is never negative,
    so thresholds below zero all express the same behaviour (punish every
    eater) while letting mood-saturated agents bleed sanction costs on agents
    that ate nothing. A threshold above the ceiling is meaningful tolerance
    (the agent currently punishes nobody), so no upper clip.
    """
    mu_eat = genome.bite_size_B + mood * genome.eat_mu_weight
    if mu_eat < 0.0:
        mu_eat = 0.0
    elif mu_eat > MU_EAT_MAX:
        mu_eat = MU_EAT_MAX
    mu_sanction = genome.sanction_threshold_S + mood * genome.sanction_mu_weight
    if mu_sanction < 0.0:
        mu_sanction = 0.0
    return mu_eat, mu_sanction
