"""Builders and digests used across the test modules."""
from __future__ import annotations

import dataclasses
import hashlib
import json

import numpy as np

from normsim.agents import (
    AgentState,
    Genome,
    TRAIT_NAMES,
    WorldState,
    baseline_behaviours,
)
from normsim.metrics import RunResult, run_summary_dict

# Interior point for every trait: mutations with small noise never hit a clamp.
_NEUTRAL = {
    "bite_size_B": 0.5,
    "sanction_threshold_S": 0.5,
    "alpha": 0.5,
    "beta": 0.5,
}


def make_genome(**overrides) -> Genome:
    """Genome with all weights zero and core traits at 0.5 unless overridden."""
    values = {name: _NEUTRAL.get(name, 0.0) for name in TRAIT_NAMES}
    unknown = set(overrides) - set(values)
    if unknown:
        raise KeyError(f"unknown trait(s): {sorted(unknown)}")
    values.update(overrides)
    return Genome(**values)


def make_agent(agent_id=0, energy=10.0, mood=0.0, genome=None, **state) -> AgentState:
    """Agent in the pre-first-turn state unless individual fields are given."""
    if genome is None:
        genome = make_genome()
    mu_eat, mu_sanction = baseline_behaviours(genome.to_array())
    fields = {
        "energy_delta_history": (),
        "last_consumed": 0.0,
        "last_sanction_loss": 0.0,
        "mu_eat_prev": mu_eat,
        "mu_sanction_prev": mu_sanction,
    }
    fields.update(state)
    return AgentState(id=agent_id, genome=genome, energy=energy, mood_M=mood, **fields)


def make_world(agents, *, resource=1000.0, t=0, seed=0, prev_tail_ids=(), **kw) -> WorldState:
    rng = np.random.default_rng([0, seed])
    return WorldState.from_agents(
        agents, resource=resource, t=t, rng=rng, prev_tail_ids=tuple(prev_tail_ids), **kw
    )


def world_digest(world: WorldState) -> str:
    """Hash of the full dynamic state, for bit-level trajectory comparisons."""
    payload = world.to_dict()
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True).encode()
    ).hexdigest()


def result_digest(result: RunResult) -> str:
    """Hash of everything a run reports: summary, step series, snapshots."""
    blob = json.dumps(run_summary_dict(result), sort_keys=True)
    rows = "".join(repr(dataclasses.astuple(row)) for row in result.step_series)
    return hashlib.sha256((blob + rows).encode()).hexdigest()


def assert_worlds_equal(a: WorldState, b: WorldState, *, context=""):
    """Exact equality of all per-agent arrays, ids, resource and clock."""
    assert a.n_alive == b.n_alive, f"{context}: population {a.n_alive} != {b.n_alive}"
    assert a.t == b.t, f"{context}: clock {a.t} != {b.t}"
    assert a.resource == b.resource, f"{context}: resource differs"
    assert a.next_id == b.next_id, f"{context}: id counter differs"
    n = a.n_alive
    np.testing.assert_array_equal(a.ids[:n], b.ids[:n], err_msg=f"{context}: ids")
    for name in (
        "genomes",
        "energy",
        "mood",
        "last_consumed",
        "last_sanction_loss",
        "mu_eat_prev",
        "mu_sanction_prev",
        "hist_len",
    ):
        left = getattr(a, name)[:n]
        right = getattr(b, name)[:n]
        np.testing.assert_array_equal(left, right, err_msg=f"{context}: {name}")
    for slot in range(n):
        assert a.history_logical(slot) == b.history_logical(slot), (
            f"{context}: history ring of slot {slot}"
        )
    tail_a = [int(a.ids[a.prev_tail[j]]) for j in range(a.prev_tail_len)]
    tail_b = [int(b.ids[b.prev_tail[j]]) for j in range(b.prev_tail_len)]
    assert tail_a == tail_b, f"{context}: prev tail"
    assert a.rng.bit_generator.state == b.rng.bit_generator.state, (
        f"{context}: rng state"
    )
