"""Round-level accounting invariants under fuzzed configurations.

Every unit of energy entering or leaving the world must land in the ledger:
intake from the pool, sanction damage and costs, metabolism, corpse removal.
"""
from __future__ import annotations

import numpy as np
import pytest

from normsim.agents import init_world
from normsim.config import InjectionConfig, SimConfig
from normsim.engine import run_round

CONFIGS = {
    "default-small": {},
    "harsh-sanctions": {"sanction_damage_D": 1.0, "sanction_cost_factor": 0.5},
    "no-maintenance": {"social_maintenance": False},
    "literal-hunger": {"hunger_mode": "literal"},
    "fast-lifecycle": {"metabolism": 0.4, "reproduction_threshold": 6.0},
    "injected": {"injection": InjectionConfig(period=7, duration=3, magnitude=50.0)},
    "scarce": {"resource_initial": 2.0, "growth_mean": 1.0, "growth_peak": 2.0},
}


def build(name):
    overrides = dict(CONFIGS[name])
    overrides.setdefault("n_agents_initial", 12)
    overrides.setdefault("n_steps", 40)
    overrides.setdefault("snapshot_step", 0)
    return SimConfig(**overrides)


@pytest.mark.parametrize("name", sorted(CONFIGS))
@pytest.mark.parametrize("seed", [0, 1])
def test_round_accounting_closes(name, seed):
    config = build(name)
    world = init_world(config, seed)
    for _ in range(config.n_steps):
        n_before = world.n_alive
        resource_before = world.resource
        ledger = run_round(world, config)

        assert ledger.n_actors == n_before
        if n_before == 0:
            assert world.n_alive == 0
            continue

        # population bookkeeping
        assert (
            world.n_alive
            == n_before + ledger.births - ledger.deaths_energy - ledger.deaths_random
        )
        assert min(ledger.births, ledger.deaths_energy, ledger.deaths_random) >= 0

        # the pool can only be drawn down by what the ledger says was eaten
        assert world.resource >= 0.0
        drawn = ledger.resource_drawn
        assert 0.0 <= drawn <= resource_before + 1e-9
        assert np.sum(ledger.intake) == pytest.approx(drawn, abs=1e-9)
        assert np.all(ledger.intake >= 0.0)

        # energy ledger closes at every phase boundary
        assert ledger.energy_sum_after_turns == pytest.approx(
            ledger.energy_sum_start
            + drawn
            - ledger.sanction_damage_total
            - ledger.sanction_cost_total,
            abs=1e-9,
        )
        assert ledger.energy_sum_after_metabolise == pytest.approx(
            ledger.energy_sum_after_turns - n_before * config.metabolism, abs=1e-9
        )
        assert ledger.energy_sum_end == pytest.approx(
            ledger.energy_sum_after_metabolise - ledger.energy_removed, abs=1e-9
        )
        living = float(np.sum(world.energy[: world.n_alive]))
        assert living == pytest.approx(ledger.energy_sum_end, abs=1e-9)

        # sanction totals are per-event multiples of the configured damage
        if not config.social_maintenance:
            assert ledger.sanctions_issued == 0
            assert ledger.sanction_damage_total == 0.0
        assert ledger.sanction_damage_total == pytest.approx(
            ledger.sanctions_issued * config.sanction_damage_D, abs=1e-9
        )
        assert np.sum(ledger.sanction_damage_received) == pytest.approx(
            ledger.sanction_damage_total, abs=1e-9
        )
        assert np.sum(ledger.sanction_cost_paid) == pytest.approx(
            ledger.sanction_cost_total, abs=1e-9
        )


def test_many_rounds_keep_world_sane():
    config = SimConfig(n_agents_initial=40, n_steps=0, snapshot_step=0)
    world = init_world(config, 7)
    for _ in range(300):
        run_round(world, config)
        n = world.n_alive
        assert world.resource >= 0.0
        assert np.all(world.energy[:n] >= 0.0)  # the dead were removed
        assert np.all(world.hist_len[:n] <= config.d_array_window)
        assert len(set(int(i) for i in world.ids[:n])) == n
        g = world.genomes[:n]
        assert np.all((g[:, :4] >= 0.0) & (g[:, :4] <= 1.0))
        assert np.all((g[:, 4:] >= -1.0) & (g[:, 4:] <= 1.0))
