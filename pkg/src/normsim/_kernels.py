"""The per-round hot loop, written once in nopython style.

The same function runs either compiled by numba (default) or as plain
Python/numpy, selected by the NORMSIM_BACKEND env var or an explicit backend
argument. Both paths share the numpy Generator, whose streams are bit-identical
under numba, so backends produce identical trajectories.

Draw order inside a round: one permutation (drawn by the caller), one dummy
uniform per acting agent in turn order, then per reproducing parent 14
(uniform, normal) pairs, then one uniform per surviving agent (newborns
included) for random death. Extinct rounds draw nothing.
"""
from __future__ import annotations

import os
import warnings

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dep, but stay usable
    numba = None
    HAVE_NUMBA = False

# Slots of the `out` totals buffer filled by simulate_round.
K_INTAKE_TOTAL = 0
K_METAB_TOTAL = 1
K_DAMAGE_TOTAL = 2
K_COST_TOTAL = 3
K_SANCTIONS = 4
K_BIRTHS = 5
K_DEATHS_ENERGY = 6
K_DEATHS_RANDOM = 7
K_HUNGER_SUM = 8
K_MU_EAT_SUM = 9
K_MU_SANCTION_SUM = 10
K_E_START = 11
K_E_AFTER_TURNS = 12
K_E_AFTER_METAB = 13
K_E_END = 14
K_E_REMOVED = 15
OUT_SIZE = 16


def simulate_round(
    genomes,
    energy,
    mood,
    hist,
    hist_len,
    hist_pos,
    last_consumed,
    last_sanction_loss,
    mu_eat_prev,
    mu_sanction_prev,
    ids,
    order,
    prev_tail,
    prev_tail_len,
    n_alive,
    t_is_zero,
    resource,
    obs_window,
    sm_on,
    hunger_literal,
    damage,
    cost_factor,
    metabolism,
    repro_threshold,
    mutation_rate,
    mutation_sd,
    death_rate,
    inject_magnitude,
    next_id,
    rng,
    out,
):
    """Run one full round over slots [0, n_alive); n_alive must be >= 1 and
    capacity >= 2 * n_alive (each actor may add one child).

    Returns (n_alive_new, resource, next_id, tail_len, intake, damage_received,
    cost_paid); the per-agent vectors are indexed by pre-round slot. prev_tail
    is overwritten with the next round's tail (remapped surviving slots).
    """
    w_hist = hist.shape[1]
    window = np.empty(obs_window + 1, dtype=np.int64)
    intake_vec = np.zeros(n_alive)
    damage_vec = np.zeros(n_alive)
    cost_vec = np.zeros(n_alive)

    e_start = 0.0
    for i in range(n_alive):
        e_start += energy[i]
    out[K_E_START] = e_start

    for p in range(n_alive):
        a = order[p]

        # Observation window: nearest predecessors this round, then the tail
        # of the previous round (most recent first), no self, no duplicates.
        # Round 0 has no previous round and starts with empty windows.
        wcnt = 0
        if not t_is_zero:
            q = p - 1
            while q >= 0 and wcnt < obs_window:
                window[wcnt] = order[q]
                wcnt += 1
                q -= 1
            q = prev_tail_len - 1
            while q >= 0 and wcnt < obs_window:
                s = prev_tail[q]
                if s != a:
                    dup = False
                    for j in range(wcnt):
                        if window[j] == s:
                            dup = True
                            break
                    if not dup:
                        window[wcnt] = s
                        wcnt += 1
                q -= 1

        # Stimuli.
        near_death = 0
        near_birth = 0
        violations = 0
        punished_sum = 0.0
        for j in range(wcnt):
            s = window[j]
            if energy[s] < 1.0:
                near_death += 1
            if energy[s] > repro_threshold:
                near_birth += 1
            punished_sum += last_sanction_loss[s]
            if last_consumed[s] > mu_sanction_prev[a]:
                violations += 1
        if wcnt > 0:
            r_death = near_death / wcnt
            r_birth = near_birth / wcnt
            r_viol = violations / wcnt
        else:
            r_death = 0.0
            r_birth = 0.0
            r_viol = 0.0

        hl = hist_len[a]
        if hl > 0:
            total = 0.0
            if hl < w_hist:
                for j in range(hl):
                    total += hist[a, j]
            else:
                hp = hist_pos[a]
                for j in range(w_hist):
                    idx = hp + j
                    if idx >= w_hist:
                        idx -= w_hist
                    total += hist[a, idx]
            d_array = total / hl
        else:
            d_array = 0.0

        if hunger_literal:
            hunger = resource - mu_eat_prev[a]
        else:
            hunger = mu_eat_prev[a] - last_consumed[a]
            if hunger < 0.0:
                hunger = 0.0
        injured = last_sanction_loss[a]
        last_sanction_loss[a] = 0.0
        dummy = rng.random()

        delta = hunger * genomes[a, 4]
        delta += injured * genomes[a, 5]
        delta += r_death * genomes[a, 6]
        delta += r_birth * genomes[a, 7]
        delta += punished_sum * genomes[a, 8]
        delta += d_array * genomes[a, 9]
        delta += r_viol * genomes[a, 10]
        delta += dummy * genomes[a, 11]

        m = (mood[a] + delta * genomes[a, 2]) * genomes[a, 3]
        if inject_magnitude != 0.0:
            if genomes[a, 9] >= 0.0:
                m += inject_magnitude
            else:
                m -= inject_magnitude
        mood[a] = m

        # Appetite clips to the bite ceiling; the tolerance threshold is free.
        mu_eat = genomes[a, 0] + m * genomes[a, 12]
        if mu_eat < 0.0:
            mu_eat = 0.0
        elif mu_eat > 1.5:
            mu_eat = 1.5
        mu_sanction = genomes[a, 1] + m * genomes[a, 13]
        if mu_sanction < 0.0:
            mu_sanction = 0.0

        # Eat.
        intake = mu_eat
        if intake > resource:
            intake = resource
        resource -= intake
        energy[a] += intake
        last_consumed[a] = intake
        intake_vec[a] = intake
        out[K_INTAKE_TOTAL] += intake

        # Sanction every window member that consumed above this turn's bar.
        if sm_on:
            for j in range(wcnt):
                s = window[j]
                if last_consumed[s] > mu_sanction:
                    energy[s] -= damage
                    last_sanction_loss[s] += damage
                    damage_vec[s] += damage
                    energy[a] -= cost_factor * damage
                    cost_vec[a] += cost_factor * damage
                    out[K_DAMAGE_TOTAL] += damage
                    out[K_COST_TOTAL] += cost_factor * damage
                    out[K_SANCTIONS] += 1.0

        mu_eat_prev[a] = mu_eat
        mu_sanction_prev[a] = mu_sanction
        out[K_HUNGER_SUM] += hunger
        out[K_MU_EAT_SUM] += mu_eat
        out[K_MU_SANCTION_SUM] += mu_sanction

    e_turns = 0.0
    for i in range(n_alive):
        e_turns += energy[i]
    out[K_E_AFTER_TURNS] = e_turns

    # Metabolise, then log each actor's net energy delta for the round.
    for i in range(n_alive):
        energy[i] -= metabolism
        out[K_METAB_TOTAL] += metabolism
    for i in range(n_alive):
        d = intake_vec[i] - metabolism - damage_vec[i] - cost_vec[i]
        if hist_len[i] < w_hist:
            hist[i, hist_len[i]] = d
            hist_len[i] += 1
        else:
            hist[i, hist_pos[i]] = d
            hist_pos[i] += 1
            if hist_pos[i] == w_hist:
                hist_pos[i] = 0

    e_metab = 0.0
    for i in range(n_alive):
        e_metab += energy[i]
    out[K_E_AFTER_METAB] = e_metab

    # Death by starvation (strict < 0).
    alive = np.ones(2 * n_alive, dtype=np.bool_)
    for i in range(n_alive):
        if energy[i] < 0.0:
            alive[i] = False
            out[K_DEATHS_ENERGY] += 1.0
            out[K_E_REMOVED] += energy[i]

    # Reproduction: one child per qualifying parent, appended in slot order.
    n_children = 0
    for i in range(n_alive):
        if alive[i] and energy[i] > repro_threshold:
            child = n_alive + n_children
            half = energy[i] * 0.5
            energy[i] = half
            energy[child] = half
            for k in range(genomes.shape[1]):
                value = genomes[i, k]
                u = rng.random()
                noise = rng.normal(0.0, mutation_sd)
                if u < mutation_rate:
                    value += noise
                if k < 4:
                    if value < 0.0:
                        value = 0.0
                    elif value > 1.0:
                        value = 1.0
                else:
                    if value < -1.0:
                        value = -1.0
                    elif value > 1.0:
                        value = 1.0
                genomes[child, k] = value
            mood[child] = 0.0
            hist_len[child] = 0
            hist_pos[child] = 0
            last_consumed[child] = 0.0
            last_sanction_loss[child] = 0.0
            b0 = genomes[child, 0]
            if b0 < 0.0:
                b0 = 0.0
            elif b0 > 1.5:
                b0 = 1.5
            mu_eat_prev[child] = b0
            s0 = genomes[child, 1]
            if s0 < 0.0:
                s0 = 0.0
            mu_sanction_prev[child] = s0
            ids[child] = next_id
            next_id += 1
            n_children += 1
            out[K_BIRTHS] += 1.0

    # Random death over everyone still standing, newborns included.
    total = n_alive + n_children
    for i in range(total):
        if alive[i]:
            if rng.random() < death_rate:
                alive[i] = False
                out[K_DEATHS_RANDOM] += 1.0
                out[K_E_REMOVED] += energy[i]

    # Stable compaction; remap keeps this round's turn order addressable.
    remap = np.empty(total, dtype=np.int64)
    n_new = 0
    for i in range(total):
        if alive[i]:
            remap[i] = n_new
            if n_new != i:
                for k in range(genomes.shape[1]):
                    genomes[n_new, k] = genomes[i, k]
                energy[n_new] = energy[i]
                mood[n_new] = mood[i]
                for k in range(w_hist):
                    hist[n_new, k] = hist[i, k]
                hist_len[n_new] = hist_len[i]
                hist_pos[n_new] = hist_pos[i]
                last_consumed[n_new] = last_consumed[i]
                last_sanction_loss[n_new] = last_sanction_loss[i]
                mu_eat_prev[n_new] = mu_eat_prev[i]
                mu_sanction_prev[n_new] = mu_sanction_prev[i]
                ids[n_new] = ids[i]
            n_new += 1
        else:
            remap[i] = -1

    e_end = 0.0
    for i in range(n_new):
        e_end += energy[i]
    out[K_E_END] = e_end

    # Next round's tail: the last up-to-obs_window turns that survived.
    tail_len = 0
    start = n_alive - obs_window
    if start < 0:
        start = 0
    for p in range(start, n_alive):
        s = remap[order[p]]
        if s >= 0:
            prev_tail[tail_len] = s
            tail_len += 1

    return n_new, resource, next_id, tail_len, intake_vec, damage_vec, cost_vec


_JITTED = None


def _jit_kernel():
    global _JITTED
    if _JITTED is None:
        _JITTED = numba.njit(cache=True)(simulate_round)
    return _JITTED


def resolve_backend(backend: str | None = None) -> str:
    """Pick 'numba' or 'numpy' from the argument, NORMSIM_BACKEND, or
    availability (numba preferred)."""
    name = backend or os.environ.get("NORMSIM_BACKEND") or (
        "numba" if HAVE_NUMBA else "numpy"
    )
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}, expected 'numba' or 'numpy'")
    if name == "numba" and not HAVE_NUMBA:
        warnings.warn("numba unavailable, falling back to numpy backend")
        return "numpy"
    return name


def get_kernel(backend: str | None = None):
    """The round kernel for the chosen backend (same function, jitted or not)."""
    if resolve_backend(backend) == "numba":
        return _jit_kernel()
    return simulate_round
