"""Round execution: eat, sanction, metabolise, death, reproduction, growth.

`run_round` drives the fused kernel from _kernels (production path). The
individual phase operations are also provided as plain functions and composed
by `run_round_reference`, a slow readable implementation kept bit-compatible
with the kernel; tests pin the two together.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels, affect, metrics
from ._kernels import get_kernel
from .agents import (
    Genome,
    N_TRAITS,
    WorldState,
    baseline_behaviours,
    clamp_traits,
    init_world,
)
from .config import ConfigError, SimConfig


@dataclass
class RoundLedger:
    """Complete energy accounting for one round.

    Per-agent vectors are indexed by the round's starting roster slot.
    Children born this round appear only in the counts. Totals are the
    kernel's sequential sums, so both backends report identical values.
    """

    t: int
    n_actors: int
    intake: np.ndarray
    sanction_damage_received: np.ndarray
    sanction_cost_paid: np.ndarray
    metabolism_per_agent: float
    resource_drawn: float
    sanction_damage_total: float
    sanction_cost_total: float
    sanctions_issued: int
    births: int
    deaths_energy: int
    deaths_random: int
    hunger_sum: float
    mu_eat_sum: float
    mu_sanction_sum: float
    energy_sum_start: float
    energy_sum_after_turns: float
    energy_sum_after_metabolise: float
    energy_sum_end: float
    energy_removed: float

    @property
    def intake_total(self) -> float:
        return self.resource_drawn

    @property
    def energy_drain(self) -> float:
        return self.resource_drawn + self.sanction_damage_total + self.sanction_cost_total

    @classmethod
    def empty(cls, t: int) -> "RoundLedger":
        zero = np.zeros(0)
        return cls(
            t=t, n_actors=0, intake=zero, sanction_damage_received=zero,
            sanction_cost_paid=zero, metabolism_per_agent=0.0, resource_drawn=0.0,
            sanction_damage_total=0.0, sanction_cost_total=0.0, sanctions_issued=0,
            births=0, deaths_energy=0, deaths_random=0, hunger_sum=0.0,
            mu_eat_sum=0.0, mu_sanction_sum=0.0, energy_sum_start=0.0,
            energy_sum_after_turns=0.0, energy_sum_after_metabolise=0.0,
            energy_sum_end=0.0, energy_removed=0.0,
        )


def replenish_resource(t: int, config: SimConfig) -> float:
    """Sinusoidal growth for step t (added to the pool by the round)."""
    swing = config.growth_peak - config.growth_mean
    return config.growth_mean + swing * math.sin(
        2.0 * math.pi * t / config.growth_period
    )


def mutate_genome(parent: Genome, config: SimConfig, rng: np.random.Generator) -> Genome:
    """Child genome: each trait draws (uniform, normal) and mutates when the
    uniform falls below mutation_rate; clamps applied afterwards."""
    values = parent.to_array()
    for k in range(N_TRAITS):
        u = rng.random()
        noise = rng.normal(0.0, config.mutation_sd)
        if u < config.mutation_rate:
            values[k] += noise
    return Genome.from_array(clamp_traits(values))


def _check_world(world: WorldState, config: SimConfig) -> None:
    if (
        world.d_array_window != config.d_array_window
        or world.observation_window != config.observation_window
    ):
        raise ConfigError("world was built with different window sizes than config")


def run_round(world: WorldState, config: SimConfig, kernel=None) -> RoundLedger:
    """Advance the world by one round and return its ledger.

    An extinct world only receives growth: no draws, no agents, t still
    advances.
    """
    _check_world(world, config)
    t = world.t
    if world.n_alive == 0:
        world.round_order = np.empty(0, dtype=np.int64)
        world.prev_tail_len = 0
        ledger = RoundLedger.empty(t)
        _apply_growth(world, t, config)
        world.t = t + 1
        return ledger

    if kernel is None:
        kernel = get_kernel(None)
    world.ensure_capacity(2 * world.n_alive)
    order = world.rng.permutation(world.n_alive)
    world.round_order = world.ids[order].copy()
    inject_magnitude = 0.0
    if config.injection is not None and config.injection.active_at(t):
        inject_magnitude = config.injection.magnitude
    out = np.zeros(_kernels.OUT_SIZE)

    n_new, resource, next_id, tail_len, intake, damage_received, cost_paid = kernel(
        world.genomes,
        world.energy,
        world.mood,
        world.hist,
        world.hist_len,
        world.hist_pos,
        world.last_consumed,
        world.last_sanction_loss,
        world.mu_eat_prev,
        world.mu_sanction_prev,
        world.ids,
        order,
        world.prev_tail,
        world.prev_tail_len,
        world.n_alive,
        t == 0,
        world.resource,
        world.observation_window,
        config.social_maintenance,
        config.hunger_mode == "literal",
        config.sanction_damage_D,
        config.sanction_cost_factor,
        config.metabolism,
        config.reproduction_threshold,
        config.mutation_rate,
        config.mutation_sd,
        config.random_death_rate,
        inject_magnitude,
        world.next_id,
        world.rng,
        out,
    )

    ledger = RoundLedger(
        t=t,
        n_actors=world.n_alive,
        intake=intake,
        sanction_damage_received=damage_received,
        sanction_cost_paid=cost_paid,
        metabolism_per_agent=config.metabolism,
        resource_drawn=float(out[_kernels.K_INTAKE_TOTAL]),
        sanction_damage_total=float(out[_kernels.K_DAMAGE_TOTAL]),
        sanction_cost_total=float(out[_kernels.K_COST_TOTAL]),
        sanctions_issued=int(out[_kernels.K_SANCTIONS]),
        births=int(out[_kernels.K_BIRTHS]),
        deaths_energy=int(out[_kernels.K_DEATHS_ENERGY]),
        deaths_random=int(out[_kernels.K_DEATHS_RANDOM]),
        hunger_sum=float(out[_kernels.K_HUNGER_SUM]),
        mu_eat_sum=float(out[_kernels.K_MU_EAT_SUM]),
        mu_sanction_sum=float(out[_kernels.K_MU_SANCTION_SUM]),
        energy_sum_start=float(out[_kernels.K_E_START]),
        energy_sum_after_turns=float(out[_kernels.K_E_AFTER_TURNS]),
        energy_sum_after_metabolise=float(out[_kernels.K_E_AFTER_METAB]),
        energy_sum_end=float(out[_kernels.K_E_END]),
        energy_removed=float(out[_kernels.K_E_REMOVED]),
    )
    world.n_alive = int(n_new)
    world.resource = float(resource)
    world.next_id = int(next_id)
    world.prev_tail_len = int(tail_len)
    _apply_growth(world, t, config)
    world.t = t + 1
    return ledger


def _apply_growth(world: WorldState, t: int, config: SimConfig) -> None:
    world.resource = max(0.0, world.resource + replenish_resource(t, config))


def run_simulation(
    config: SimConfig, run_seed: int, backend: str | None = None
) -> metrics.RunResult:
    """One full run: init, n_steps rounds, per-step metrics, snapshots at
    snapshot_step and n_steps."""
    world = init_world(config, run_seed)
    kernel = get_kernel(backend) if world.n_alive or config.n_steps else None
    snapshots: dict[int, metrics.TraitSnapshot] = {}
    include_sanction = config.social_maintenance
    if config.snapshot_step == 0:
        snapshots[0] = metrics.snapshot_traits(world, 0, include_sanction)
    series: list[metrics.StepMetrics] = []
    for _ in range(config.n_steps):
        ledger = run_round(world, config, kernel)
        series.append(metrics.record_step(world, ledger))
        if world.t == config.snapshot_step:
            snapshots[world.t] = metrics.snapshot_traits(
                world, world.t, include_sanction
            )
    snapshots[config.n_steps] = metrics.snapshot_traits(
        world, config.n_steps, include_sanction
    )
    populations = np.array([m.population for m in series], dtype=np.float64)
    population_variance = float(np.var(populations)) if len(populations) else 0.0
    return metrics.RunResult(
        config_fingerprint=config.fingerprint(),
        run_seed=run_seed,
        step_series=series,
        snapshots=snapshots,
        survived=world.n_alive > 0,
        population_variance=population_variance,
    )


# --- Phase operations -------------------------------------------------------
# Readable single-phase versions of what the kernel fuses. run_round_reference
# composes them into a full round that tests hold bit-identical to run_round.


def build_observation_window(
    world: WorldState, order: np.ndarray, position: int
) -> list[int]:
    """Roster slots the agent at `position` in `order` observes this round:
    nearest current-round predecessors first, then the previous round's tail
    (most recent first), without self or duplicates. Empty at t=0."""
    if world.t == 0:
        return []
    focal = int(order[position])
    limit = world.observation_window
    window: list[int] = []
    q = position - 1
    while q >= 0 and len(window) < limit:
        window.append(int(order[q]))
        q -= 1
    q = world.prev_tail_len - 1
    while q >= 0 and len(window) < limit:
        slot = int(world.prev_tail[q])
        if slot != focal and slot not in window:
            window.append(slot)
        q -= 1
    return window


def observation_context(world: WorldState, window: list[int]) -> affect.ObservationContext:
    return affect.ObservationContext(
        observed=tuple(
            (
                float(world.last_consumed[s]),
                float(world.last_sanction_loss[s]),
                float(world.energy[s]),
            )
            for s in window
        )
    )


def eat_step(world: WorldState, slot: int, mu_eat: float) -> float:
    """Consume min(mu_eat, pool); the pool never goes negative."""
    intake = mu_eat if mu_eat <= world.resource else world.resource
    world.resource -= intake
    world.energy[slot] += intake
    world.last_consumed[slot] = intake
    return intake


def sanction_step(
    world: WorldState,
    slot: int,
    window: list[int],
    mu_sanction: float,
    config: SimConfig,
    ledger_damage: np.ndarray | None = None,
    ledger_cost: np.ndarray | None = None,
) -> int:
    """Punish every observed agent whose realised intake exceeds mu_sanction
    (strict). Target loses D, the punisher pays cost_factor * D. No-op when
    social maintenance is off."""
    if not config.social_maintenance:
        return 0
    issued = 0
    damage = config.sanction_damage_D
    cost = config.sanction_cost_factor * damage
    for target in window:
        if world.last_consumed[target] > mu_sanction:
            world.energy[target] -= damage
            world.last_sanction_loss[target] += damage
            world.energy[slot] -= cost
            if ledger_damage is not None:
                ledger_damage[target] += damage
            if ledger_cost is not None:
                ledger_cost[slot] += cost
            issued += 1
    return issued


def metabolise(world: WorldState, config: SimConfig) -> None:
    """Every living agent pays the per-round upkeep."""
    for slot in range(world.n_alive):
        world.energy[slot] -= config.metabolism


def death_and_reproduction(world: WorldState, config: SimConfig) -> dict:
    """Starvation deaths (energy < 0), then one child per agent above the
    reproduction threshold (parent and child each at half the parent's
    energy), then random death over everyone including newborns, then stable
    compaction. Returns the ledger fragment plus the slot remap."""
    n = world.n_alive
    world.ensure_capacity(2 * n)
    alive = np.ones(2 * n, dtype=bool)
    deaths_energy = 0
    deaths_random = 0
    energy_removed = 0.0
    for i in range(n):
        if world.energy[i] < 0.0:
            alive[i] = False
            deaths_energy += 1
            energy_removed += float(world.energy[i])

    births = 0
    for i in range(n):
        if alive[i] and world.energy[i] > config.reproduction_threshold:
            child = n + births
            half = float(world.energy[i]) * 0.5
            world.energy[i] = half
            world.energy[child] = half
            genome = mutate_genome(
                Genome.from_array(world.genomes[i]), config, world.rng
            )
            world.genomes[child] = genome.to_array()
            world.mood[child] = 0.0
            world.hist_len[child] = 0
            world.hist_pos[child] = 0
            world.last_consumed[child] = 0.0
            world.last_sanction_loss[child] = 0.0
            mu_eat0, mu_sanction0 = baseline_behaviours(world.genomes[child])
            world.mu_eat_prev[child] = mu_eat0
            world.mu_sanction_prev[child] = mu_sanction0
            world.ids[child] = world.next_id
            world.next_id += 1
            births += 1

    total = n + births
    for i in range(total):
        if alive[i]:
            if world.rng.random() < config.random_death_rate:
                alive[i] = False
                deaths_random += 1
                energy_removed += float(world.energy[i])

    remap = np.full(total, -1, dtype=np.int64)
    kept = 0
    for i in range(total):
        if alive[i]:
            remap[i] = kept
            if kept != i:
                world.genomes[kept] = world.genomes[i]
                world.energy[kept] = world.energy[i]
                world.mood[kept] = world.mood[i]
                world.hist[kept] = world.hist[i]
                world.hist_len[kept] = world.hist_len[i]
                world.hist_pos[kept] = world.hist_pos[i]
                world.last_consumed[kept] = world.last_consumed[i]
                world.last_sanction_loss[kept] = world.last_sanction_loss[i]
                world.mu_eat_prev[kept] = world.mu_eat_prev[i]
                world.mu_sanction_prev[kept] = world.mu_sanction_prev[i]
                world.ids[kept] = world.ids[i]
            kept += 1
    world.n_alive = kept
    return {
        "births": births,
        "deaths_energy": deaths_energy,
        "deaths_random": deaths_random,
        "energy_removed": energy_removed,
        "remap": remap,
    }


def run_round_reference(world: WorldState, config: SimConfig) -> RoundLedger:
    """Slow composition of the phase operations; draw-for-draw and
    bit-for-bit equivalent to run_round."""
    _check_world(world, config)
    t = world.t
    if world.n_alive == 0:
        world.round_order = np.empty(0, dtype=np.int64)
        world.prev_tail_len = 0
        ledger = RoundLedger.empty(t)
        _apply_growth(world, t, config)
        world.t = t + 1
        return ledger

    n = world.n_alive
    world.ensure_capacity(2 * n)
    order = world.rng.permutation(n)
    world.round_order = world.ids[order].copy()
    inject_magnitude = 0.0
    if config.injection is not None and config.injection.active_at(t):
        inject_magnitude = config.injection.magnitude

    intake_vec = np.zeros(n)
    damage_vec = np.zeros(n)
    cost_vec = np.zeros(n)
    intake_total = 0.0
    damage_total = 0.0
    cost_total = 0.0
    sanctions = 0
    hunger_sum = 0.0
    mu_eat_sum = 0.0
    mu_sanction_sum = 0.0
    e_start = float(sum(float(world.energy[i]) for i in range(n)))

    for position in range(n):
        slot = int(order[position])
        window = build_observation_window(world, order, position)
        agent = world.agent(slot)
        stimuli = affect.compute_stimuli(
            agent,
            observation_context(world, window),
            agent.mu_eat_prev,
            world.rng,
            near_birth_energy=config.reproduction_threshold,
            hunger_mode=config.hunger_mode,
            resource=world.resource,
        )
        world.last_sanction_loss[slot] = 0.0
        delta = affect.mood_delta(stimuli, agent.genome)
        mood = affect.update_mood(agent.mood_M, delta, agent.genome.alpha, agent.genome.beta)
        if inject_magnitude != 0.0:
            mood = affect.apply_injection(
                mood, agent.genome.d_array_weight, inject_magnitude
            )
        world.mood[slot] = mood
        mu_eat, mu_sanction = affect.modulate_behaviour(agent.genome, mood)
        intake = eat_step(world, slot, mu_eat)
        intake_vec[slot] = intake
        intake_total += intake
        issued = sanction_step(
            world, slot, window, mu_sanction, config, damage_vec, cost_vec
        )
        sanctions += issued
        # One add per sanction event, like the kernel, so totals match bitwise.
        for _ in range(issued):
            damage_total += config.sanction_damage_D
            cost_total += config.sanction_cost_factor * config.sanction_damage_D
        world.mu_eat_prev[slot] = mu_eat
        world.mu_sanction_prev[slot] = mu_sanction
        hunger_sum += stimuli.hunger
        mu_eat_sum += mu_eat
        mu_sanction_sum += mu_sanction

    e_turns = float(sum(float(world.energy[i]) for i in range(n)))
    metabolise(world, config)
    for i in range(n):
        d = intake_vec[i] - config.metabolism - damage_vec[i] - cost_vec[i]
        w = world.d_array_window
        if world.hist_len[i] < w:
            world.hist[i, world.hist_len[i]] = d
            world.hist_len[i] += 1
        else:
            world.hist[i, world.hist_pos[i]] = d
            world.hist_pos[i] = (world.hist_pos[i] + 1) % w
    e_metab = float(sum(float(world.energy[i]) for i in range(n)))

    fragment = death_and_reproduction(world, config)
    remap = fragment["remap"]
    e_end = float(sum(float(world.energy[i]) for i in range(world.n_alive)))

    tail: list[int] = []
    for position in range(max(0, n - world.observation_window), n):
        slot = int(remap[order[position]])
        if slot >= 0:
            tail.append(slot)
    world.prev_tail[: len(tail)] = tail
    world.prev_tail_len = len(tail)

    ledger = RoundLedger(
        t=t,
        n_actors=n,
        intake=intake_vec,
        sanction_damage_received=damage_vec,
        sanction_cost_paid=cost_vec,
        metabolism_per_agent=config.metabolism,
        resource_drawn=intake_total,
        sanction_damage_total=damage_total,
        sanction_cost_total=cost_total,
        sanctions_issued=sanctions,
        births=fragment["births"],
        deaths_energy=fragment["deaths_energy"],
        deaths_random=fragment["deaths_random"],
        hunger_sum=hunger_sum,
        mu_eat_sum=mu_eat_sum,
        mu_sanction_sum=mu_sanction_sum,
        energy_sum_start=e_start,
        energy_sum_after_turns=e_turns,
        energy_sum_after_metabolise=e_metab,
        energy_sum_end=e_end,
        energy_removed=fragment["energy_removed"],
    )
    _apply_growth(world, t, config)
    world.t = t + 1
    return ledger
