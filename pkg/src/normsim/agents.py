"""Genome, agent and world state for the commons simulator.

The world is stored struct-of-arrays so the round kernel can run compiled;
`Genome`/`AgentState` are value views used by the API, tests, and
serialisation. Slots [0, n_alive) of every array are the living roster, in
roster order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator

import numpy as np

from .config import ConfigError, SimConfig

# Trait column order; everything (arrays, CSVs, correlation labels) uses it.
TRAIT_NAMES: tuple[str, ...] = (
    "bite_size_B",
    "sanction_threshold_S",
    "alpha",
    "beta",
    "hunger_weight",
    "injured_weight",
    "others_near_death_weight",
    "others_near_birth_weight",
    "others_being_punished_weight",
    "d_array_weight",
    "others_violations_weight",
    "dummy_weight",
    "eat_mu_weight",
    "sanction_mu_weight",
)
N_TRAITS = len(TRAIT_NAMES)
STIMULUS_WEIGHT_NAMES: tuple[str, ...] = TRAIT_NAMES[4:12]
BEHAVIOUR_NAMES: tuple[str, ...] = ("mu_eat", "mu_sanction")

# Energy every agent starts life with at t=0 (newborns use half the parent's).
INITIAL_ENERGY = 10.0

# Ceiling on the mood-modulated appetite. Bounds the whole affect loop: the
# hunger stimulus (unfulfilled desire) can never exceed it, so mood stays on
# the same scale as the stimuli instead of feeding back on itself.
MU_EAT_MAX = 1.5


def clamp_traits(values: np.ndarray) -> np.ndarray:
    """Apply the trait bounds in place: behaviours and mood rates stay in
    their initialisation range [0,1], weights in theirs, [-1,1]."""
    for k in range(4):
        values[k] = min(1.0, max(0.0, values[k]))
    for k in range(4, N_TRAITS):
        values[k] = min(1.0, max(-1.0, values[k]))
    return values


@dataclass(frozen=True)
class Genome:
    """One agent's 14 heritable traits."""

    bite_size_B: float
    sanction_threshold_S: float
    alpha: float
    beta: float
    hunger_weight: float
    injured_weight: float
    others_near_death_weight: float
    others_near_birth_weight: float
    others_being_punished_weight: float
    d_array_weight: float
    others_violations_weight: float
    dummy_weight: float
    eat_mu_weight: float
    sanction_mu_weight: float

    @property
    def stimulus_weights(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in STIMULUS_WEIGHT_NAMES}

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in TRAIT_NAMES], dtype=np.float64)

    @classmethod
    def from_array(cls, values: np.ndarray) -> "Genome":
        if len(values) != N_TRAITS:
            raise ValueError(f"genome needs {N_TRAITS} values, got {len(values)}")
        return cls(**{n: float(v) for n, v in zip(TRAIT_NAMES, values)})

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "bite_size_B": self.bite_size_B,
            "sanction_threshold_S": self.sanction_threshold_S,
            "alpha": self.alpha,
            "beta": self.beta,
            "stimulus_weights": self.stimulus_weights,
            "eat_mu_weight": self.eat_mu_weight,
            "sanction_mu_weight": self.sanction_mu_weight,
        }
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Genome":
        flat = dict(data)
        weights = flat.pop("stimulus_weights", {})
        flat.update(weights)
        return cls(**{n: float(flat[n]) for n in TRAIT_NAMES})


@dataclass
class AgentState:
    """Value view of one living agent.

    energy_delta_history is in logical order, oldest first. mu_eat_prev and
    mu_sanction_prev are the behaviours realised on the agent's most recent
    turn (baseline behaviours at mood 0 before the first turn); the hunger and
    violation stimuli read them.
    """

    id: int
    genome: Genome
    energy: float
    mood_M: float
    energy_delta_history: tuple[float, ...]
    last_consumed: float
    last_sanction_loss: float
    mu_eat_prev: float
    mu_sanction_prev: float
    alive: bool = True

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "genome": self.genome.to_dict(),
            "energy": self.energy,
            "mood_M": self.mood_M,
            "energy_delta_history": list(self.energy_delta_history),
            "last_consumed": self.last_consumed,
            "last_sanction_loss": self.last_sanction_loss,
            "mu_eat_prev": self.mu_eat_prev,
            "mu_sanction_prev": self.mu_sanction_prev,
            "alive": self.alive,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "AgentState":
        return cls(
            id=int(data["id"]),
            genome=Genome.from_dict(data["genome"]),
            energy=float(data["energy"]),
            mood_M=float(data["mood_M"]),
            energy_delta_history=tuple(float(v) for v in data["energy_delta_history"]),
            last_consumed=float(data["last_consumed"]),
            last_sanction_loss=float(data["last_sanction_loss"]),
            mu_eat_prev=float(data["mu_eat_prev"]),
            mu_sanction_prev=float(data["mu_sanction_prev"]),
            alive=bool(data.get("alive", True)),
        )


def baseline_behaviours(genome_row: np.ndarray) -> tuple[float, float]:
    """Behaviours at mood 0: (B clipped to the bite ceiling, S floored)."""
    return (
        min(MU_EAT_MAX, max(0.0, float(genome_row[0]))),
        max(0.0, float(genome_row[1])),
    )


@dataclass
class WorldState:
    """Full mutable simulation state (struct-of-arrays plus bookkeeping)."""

    resource: float
    t: int
    n_alive: int
    next_id: int
    d_array_window: int
    observation_window: int
    rng: np.random.Generator
    genomes: np.ndarray  # (cap, N_TRAITS) float64
    energy: np.ndarray  # (cap,) float64
    mood: np.ndarray  # (cap,) float64
    hist: np.ndarray  # (cap, d_array_window) float64 ring buffers
    hist_len: np.ndarray  # (cap,) int64
    hist_pos: np.ndarray  # (cap,) int64, oldest index once the ring is full
    last_consumed: np.ndarray  # (cap,) float64
    last_sanction_loss: np.ndarray  # (cap,) float64
    mu_eat_prev: np.ndarray  # (cap,) float64
    mu_sanction_prev: np.ndarray  # (cap,) float64
    ids: np.ndarray  # (cap,) int64
    prev_tail: np.ndarray  # (observation_window,) int64 roster slots
    prev_tail_len: int = 0
    round_order: np.ndarray = field(
        default_factory=lambda: np.empty(0, dtype=np.int64)
    )  # ids in the most recent round's turn order

    @property
    def capacity(self) -> int:
        return self.energy.shape[0]

    def ensure_capacity(self, min_cap: int) -> None:
        cap = self.capacity
        if cap >= min_cap:
            return
        new_cap = max(min_cap, 2 * cap)
        self.genomes = _grow(self.genomes, new_cap)
        self.energy = _grow(self.energy, new_cap)
        self.mood = _grow(self.mood, new_cap)
        self.hist = _grow(self.hist, new_cap)
        self.hist_len = _grow(self.hist_len, new_cap)
        self.hist_pos = _grow(self.hist_pos, new_cap)
        self.last_consumed = _grow(self.last_consumed, new_cap)
        self.last_sanction_loss = _grow(self.last_sanction_loss, new_cap)
        self.mu_eat_prev = _grow(self.mu_eat_prev, new_cap)
        self.mu_sanction_prev = _grow(self.mu_sanction_prev, new_cap)
        self.ids = _grow(self.ids, new_cap)

    def history_logical(self, slot: int) -> tuple[float, ...]:
        """Energy-delta ring in logical order (oldest first)."""
        n = int(self.hist_len[slot])
        w = self.d_array_window
        if n < w:
            return tuple(float(v) for v in self.hist[slot, :n])
        pos = int(self.hist_pos[slot])
        return tuple(float(self.hist[slot, (pos + j) % w]) for j in range(w))

    def agent(self, slot: int) -> AgentState:
        if not 0 <= slot < self.n_alive:
            raise IndexError(f"slot {slot} outside living roster")
        return AgentState(
            id=int(self.ids[slot]),
            genome=Genome.from_array(self.genomes[slot]),
            energy=float(self.energy[slot]),
            mood_M=float(self.mood[slot]),
            energy_delta_history=self.history_logical(slot),
            last_consumed=float(self.last_consumed[slot]),
            last_sanction_loss=float(self.last_sanction_loss[slot]),
            mu_eat_prev=float(self.mu_eat_prev[slot]),
            mu_sanction_prev=float(self.mu_sanction_prev[slot]),
        )

    def agents(self) -> Iterator[AgentState]:
        for slot in range(self.n_alive):
            yield self.agent(slot)

    @classmethod
    def from_agents(
        cls,
        agents: list[AgentState],
        resource: float,
        t: int = 0,
        *,
        d_array_window: int = 10,
        observation_window: int = 10,
        rng: np.random.Generator | None = None,
        next_id: int | None = None,
        prev_tail_ids: tuple[int, ...] = (),
    ) -> "WorldState":
        """Build a world from explicit agents (tests, loading, oracles)."""
        n = len(agents)
        cap = max(16, 2 * n)
        world = cls(
            resource=float(resource),
            t=int(t),
            n_alive=n,
            next_id=0,
            d_array_window=d_array_window,
            observation_window=observation_window,
            rng=rng if rng is not None else np.random.default_rng(0),
            genomes=np.zeros((cap, N_TRAITS)),
            energy=np.zeros(cap),
            mood=np.zeros(cap),
            hist=np.zeros((cap, d_array_window)),
            hist_len=np.zeros(cap, dtype=np.int64),
            hist_pos=np.zeros(cap, dtype=np.int64),
            last_consumed=np.zeros(cap),
            last_sanction_loss=np.zeros(cap),
            mu_eat_prev=np.zeros(cap),
            mu_sanction_prev=np.zeros(cap),
            ids=np.zeros(cap, dtype=np.int64),
            prev_tail=np.full(observation_window, -1, dtype=np.int64),
        )
        for slot, agent in enumerate(agents):
            world.genomes[slot] = agent.genome.to_array()
            world.energy[slot] = agent.energy
            world.mood[slot] = agent.mood_M
            hist = agent.energy_delta_history
            if len(hist) > d_array_window:
                raise ValueError("energy_delta_history longer than d_array_window")
            world.hist[slot, : len(hist)] = hist
            world.hist_len[slot] = len(hist)
            world.last_consumed[slot] = agent.last_consumed
            world.last_sanction_loss[slot] = agent.last_sanction_loss
            world.mu_eat_prev[slot] = agent.mu_eat_prev
            world.mu_sanction_prev[slot] = agent.mu_sanction_prev
            world.ids[slot] = agent.id
        if len(set(int(a.id) for a in agents)) != n:
            raise ValueError("agent ids must be unique")
        world.next_id = (
            next_id
            if next_id is not None
            else (int(world.ids[:n].max()) + 1 if n else 0)
        )
        id_to_slot = {int(world.ids[s]): s for s in range(n)}
        tail = [id_to_slot[i] for i in prev_tail_ids]
        if len(tail) > observation_window:
            raise ValueError("prev_tail longer than observation_window")
        world.prev_tail[: len(tail)] = tail
        world.prev_tail_len = len(tail)
        return world

    def to_dict(self) -> dict[str, Any]:
        return {
            "resource": self.resource,
            "t": self.t,
            "next_id": self.next_id,
            "d_array_window": self.d_array_window,
            "observation_window": self.observation_window,
            "agents": [agent.to_dict() for agent in self.agents()],
            "prev_tail_ids": [
                int(self.ids[self.prev_tail[j]]) for j in range(self.prev_tail_len)
            ],
            "round_order_ids": [int(i) for i in self.round_order],
            "rng_state": self.rng.bit_generator.state,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "WorldState":
        rng = np.random.default_rng(0)
        rng.bit_generator.state = data["rng_state"]
        world = cls.from_agents(
            [AgentState.from_dict(a) for a in data["agents"]],
            resource=float(data["resource"]),
            t=int(data["t"]),
            d_array_window=int(data["d_array_window"]),
            observation_window=int(data["observation_window"]),
            rng=rng,
            next_id=int(data["next_id"]),
            prev_tail_ids=tuple(int(i) for i in data["prev_tail_ids"]),
        )
        world.round_order = np.array(
            data.get("round_order_ids", []), dtype=np.int64
        )
        return world


def _grow(arr: np.ndarray, new_cap: int) -> np.ndarray:
    shape = (new_cap,) + arr.shape[1:]
    out = np.zeros(shape, dtype=arr.dtype)
    out[: arr.shape[0]] = arr
    return out


def init_world(config: SimConfig, run_seed: int) -> WorldState:
    """Fresh world for one run.

    The run generator is seeded from (master_seed, run_seed). Initial trait
    draws are column-major: all bite sizes, then all sanction thresholds,
    then alpha, beta, then each weight column in trait order.
    """
    config.validate()
    if run_seed < 0:
        raise ConfigError(f"run_seed must be >= 0, got {run_seed}")
    rng = np.random.default_rng([config.master_seed, run_seed])
    n = config.n_agents_initial
    cap = max(16, 2 * n)
    genomes = np.zeros((cap, N_TRAITS))
    for col in range(4):
        genomes[:n, col] = rng.random(n)
    for col in range(4, N_TRAITS):
        genomes[:n, col] = rng.uniform(-1.0, 1.0, n)
    world = WorldState(
        resource=float(config.resource_initial),
        t=0,
        n_alive=n,
        next_id=n,
        d_array_window=config.d_array_window,
        observation_window=config.observation_window,
        rng=rng,
        genomes=genomes,
        energy=np.zeros(cap),
        mood=np.zeros(cap),
        hist=np.zeros((cap, config.d_array_window)),
        hist_len=np.zeros(cap, dtype=np.int64),
        hist_pos=np.zeros(cap, dtype=np.int64),
        last_consumed=np.zeros(cap),
        last_sanction_loss=np.zeros(cap),
        mu_eat_prev=np.zeros(cap),
        mu_sanction_prev=np.zeros(cap),
        ids=np.zeros(cap, dtype=np.int64),
        prev_tail=np.full(config.observation_window, -1, dtype=np.int64),
    )
    world.energy[:n] = INITIAL_ENERGY
    world.ids[:n] = np.arange(n, dtype=np.int64)
    world.mu_eat_prev[:n] = np.clip(genomes[:n, 0], 0.0, MU_EAT_MAX)
    world.mu_sanction_prev[:n] = np.maximum(0.0, genomes[:n, 1])
    return world
