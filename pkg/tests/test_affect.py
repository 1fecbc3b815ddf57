"""Stimulus sensing, mood update, injection, behaviour modulation."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from normsim.affect import (
    NEAR_DEATH_ENERGY,
    STIMULUS_NAMES,
    ObservationContext,
    StimulusVector,
    apply_injection,
    compute_stimuli,
    modulate_behaviour,
    mood_delta,
    update_mood,
)
from normsim.agents import MU_EAT_MAX, STIMULUS_WEIGHT_NAMES, baseline_behaviours

from helpers import make_agent, make_genome


def obs(*triples):
    return ObservationContext(observed=tuple(triples))


def test_stimulus_order_matches_weight_columns():
    assert STIMULUS_WEIGHT_NAMES == tuple(f"{n}_weight" for n in STIMULUS_NAMES)


def test_empty_window_social_stimuli_are_zero():
    agent = make_agent(energy=5.0, last_consumed=0.2, mu_eat_prev=0.6)
    s = compute_stimuli(agent, obs(), mu_eat_prev=0.6, rng=np.random.default_rng(7))
    assert s.others_near_death == 0.0
    assert s.others_near_birth == 0.0
    assert s.others_being_punished == 0.0
    assert s.others_violations == 0.0
    assert s.d_array == 0.0  # no history yet either
    assert s.hunger == pytest.approx(0.4)
    assert s.dummy == np.random.default_rng(7).random()


def test_near_death_and_near_birth_are_strict():
    agent = make_agent()
    window = obs(
        (0.0, 0.0, NEAR_DEATH_ENERGY),  # exactly at the bar: not near death
        (0.0, 0.0, NEAR_DEATH_ENERGY - 1e-9),
        (0.0, 0.0, 10.0),  # exactly at the bar: not near birth
        (0.0, 0.0, 10.0 + 1e-9),
    )
    s = compute_stimuli(agent, window, 0.0, np.random.default_rng(0))
    assert s.others_near_death == pytest.approx(0.25)
    assert s.others_near_birth == pytest.approx(0.25)


def test_violations_compare_against_own_previous_threshold():
    agent = make_agent(mu_sanction_prev=0.5)
    window = obs((0.5, 0.0, 5.0), (0.5 + 1e-12, 0.0, 5.0), (0.7, 0.0, 5.0))
    s = compute_stimuli(agent, window, 0.0, np.random.default_rng(0))
    assert s.others_violations == pytest.approx(2.0 / 3.0)


def test_punished_is_a_sum_not_a_ratio():
    agent = make_agent()
    window = obs((0.0, 0.3, 5.0), (0.0, 0.0, 5.0), (0.0, 1.2, 5.0))
    s = compute_stimuli(agent, window, 0.0, np.random.default_rng(0))
    assert s.others_being_punished == pytest.approx(1.5)


def test_injured_reads_own_last_loss():
    agent = make_agent(last_sanction_loss=0.6)
    s = compute_stimuli(agent, obs(), 0.0, np.random.default_rng(0))
    assert s.injured == 0.6


def test_d_array_is_history_mean():
    agent = make_agent(energy_delta_history=(1.0, -0.5, 0.2, 0.5))
    s = compute_stimuli(agent, obs(), 0.0, np.random.default_rng(0))
    assert s.d_array == pytest.approx(0.3)


def test_hunger_prose_floors_at_zero():
    agent = make_agent(last_consumed=0.9)
    s = compute_stimuli(agent, obs(), mu_eat_prev=0.4, rng=np.random.default_rng(0))
    assert s.hunger == 0.0


def test_hunger_literal_reads_the_pool():
    agent = make_agent(last_consumed=0.9)
    kw = dict(hunger_mode="literal", resource=5.0)
    s = compute_stimuli(agent, obs(), 0.7, np.random.default_rng(0), **kw)
    assert s.hunger == pytest.approx(4.3)
    kw["resource"] = 0.2
    s = compute_stimuli(agent, obs(), 0.7, np.random.default_rng(0), **kw)
    assert s.hunger == pytest.approx(-0.5)  # scarcity reads as negative


def test_dummy_consumes_exactly_one_draw():
    rng = np.random.default_rng(42)
    compute_stimuli(make_agent(), obs(), 0.0, rng)
    assert rng.random() == np.random.default_rng(42).random(2)[1]


def zero_stimuli(**overrides):
    values = {name: 0.0 for name in STIMULUS_NAMES}
    values.update(overrides)
    return StimulusVector(**values)


def test_mood_delta_zero_weights():
    s = zero_stimuli(hunger=3.0, dummy=0.9)
    assert mood_delta(s, make_genome()) == 0.0


def test_mood_delta_hand_value():
    s = zero_stimuli(hunger=0.5, injured=2.0, d_array=-1.0, dummy=0.25)
    genome = make_genome(
        hunger_weight=0.4, injured_weight=-0.5, d_array_weight=0.1, dummy_weight=1.0
    )
    assert mood_delta(s, genome) == pytest.approx(0.5 * 0.4 - 2.0 * 0.5 - 0.1 + 0.25)


def test_update_mood():
    assert update_mood(3.0, 2.0, alpha=0.5, beta=0.25) == pytest.approx(1.0)
    assert update_mood(4.0, 100.0, alpha=0.0, beta=0.5) == pytest.approx(2.0)
    assert update_mood(4.0, 1.0, alpha=1.0, beta=0.0) == 0.0
    assert update_mood(-2.0, 1.0, alpha=1.0, beta=1.0) == pytest.approx(-1.0)


@pytest.mark.parametrize(
    "weight,expected",
    [(0.5, 12.0), (-0.5, 8.0), (0.0, 12.0)],  # ties break positive
)
def test_apply_injection_sign(weight, expected):
    assert apply_injection(10.0, weight, 2.0) == expected


def test_modulate_behaviour_zero_mood_is_baseline():
    genome = make_genome(bite_size_B=0.8, sanction_threshold_S=0.1)
    assert modulate_behaviour(genome, 0.0) == baseline_behaviours(genome.to_array())


def test_modulate_behaviour_saturation():
    genome = make_genome(eat_mu_weight=1.0, sanction_mu_weight=1.0)
    mu_eat, mu_sanction = modulate_behaviour(genome, 1e9)
    assert mu_eat == MU_EAT_MAX
    assert mu_sanction == pytest.approx(1e9 + 0.5)  # no upper clip on tolerance
    mu_eat, mu_sanction = modulate_behaviour(genome, -1e9)
    assert mu_eat == 0.0
    assert mu_sanction == 0.0


@given(
    bite=st.floats(0, 1),
    threshold=st.floats(0, 1),
    w_eat=st.floats(-1, 1),
    w_sanction=st.floats(-1, 1),
    mood=st.floats(-1e6, 1e6, allow_nan=False),
)
def test_modulate_behaviour_bounds(bite, threshold, w_eat, w_sanction, mood):
    genome = make_genome(
        bite_size_B=bite,
        sanction_threshold_S=threshold,
        eat_mu_weight=w_eat,
        sanction_mu_weight=w_sanction,
    )
    mu_eat, mu_sanction = modulate_behaviour(genome, mood)
    assert 0.0 <= mu_eat <= MU_EAT_MAX
    assert mu_sanction >= 0.0
    raw_eat = bite + mood * w_eat
    if 0.0 < raw_eat < MU_EAT_MAX:
        assert mu_eat == raw_eat
    raw_sanction = threshold + mood * w_sanction
    if raw_sanction > 0.0:
        assert mu_sanction == raw_sanction
