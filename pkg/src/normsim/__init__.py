"""normsim: a deterministic evolutionary commons simulator.

Agents share a replenishing resource pool. Each agent carries an evolvable
disposition (stimulus weights, mood dynamics, behaviour couplings) that maps
what it senses to a mood and its mood to how much it eats and how much
over-consumption by others it tolerates before punishing them. Reproduction,
mutation and death let populations evolve their own consumption regularities;
the analysis layer measures whether those regularities are norms.
"""
from ._kernels import HAVE_NUMBA, get_kernel, resolve_backend
from .affect import (
    ObservationContext,
    StimulusVector,
    apply_injection,
    compute_stimuli,
    modulate_behaviour,
    mood_delta,
    update_mood,
)
from .agents import (
    AgentState,
    BEHAVIOUR_NAMES,
    Genome,
    INITIAL_ENERGY,
    N_TRAITS,
    TRAIT_NAMES,
    WorldState,
    init_world,
)
from .analysis import (
    ExperimentSummary,
    InsufficientDataError,
    NormThresholds,
    classify_norm,
    correlation_matrix,
    injection_comparison,
    mean_of_variance,
    regulation_split,
    summarize_condition,
    variance_of_mean,
)
from .config import ConfigError, InjectionConfig, SimConfig, load_config
from .engine import (
    RoundLedger,
    build_observation_window,
    death_and_reproduction,
    eat_step,
    metabolise,
    mutate_genome,
    replenish_resource,
    run_round,
    run_round_reference,
    run_simulation,
    sanction_step,
)
from .experiments import (
    Condition,
    ExperimentPlan,
    RunFailure,
    load_plan,
    run_experiment,
)
from .metrics import (
    RunResult,
    StepMetrics,
    TraitSnapshot,
    load_run_result,
    read_series_csv,
    record_step,
    snapshot_traits,
    write_series_csv,
)

__version__ = "0.1.0"

__all__ = [
    "AgentState",
    "BEHAVIOUR_NAMES",
    "Condition",
    "ConfigError",
    "ExperimentPlan",
    "ExperimentSummary",
    "Genome",
    "HAVE_NUMBA",
    "INITIAL_ENERGY",
    "InjectionConfig",
    "InsufficientDataError",
    "N_TRAITS",
    "NormThresholds",
    "ObservationContext",
    "RoundLedger",
    "RunFailure",
    "RunResult",
    "SimConfig",
    "StepMetrics",
    "StimulusVector",
    "TRAIT_NAMES",
    "TraitSnapshot",
    "WorldState",
    "apply_injection",
    "build_observation_window",
    "classify_norm",
    "compute_stimuli",
    "correlation_matrix",
    "death_and_reproduction",
    "eat_step",
    "get_kernel",
    "init_world",
    "injection_comparison",
    "load_config",
    "load_plan",
    "load_run_result",
    "mean_of_variance",
    "metabolise",
    "modulate_behaviour",
    "mood_delta",
    "mutate_genome",
    "read_series_csv",
    "record_step",
    "regulation_split",
    "replenish_resource",
    "resolve_backend",
    "run_experiment",
    "run_round",
    "run_round_reference",
    "run_simulation",
    "sanction_step",
    "snapshot_traits",
    "summarize_condition",
    "update_mood",
    "variance_of_mean",
    "write_series_csv",
]
