"""Exact sampling of the coupled clock process.

Given the current full state and clock readings, every node races a residual
holding time drawn from its survival law conditioned on its elapsed clock;
the minimum wins, the winner's landing state follows its categorical, the
winner's clock resets and everyone else's keeps running.  The induced global
holding law and transition probabilities are exposed for likelihood checks.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ModelError, StalledProcessError
from .model import Event, Model, Trajectory, validate_trajectory
from .survival import hazard, log_survival, sample_truncated

_MAX_EVENTS_GUARD = 50_000_000


def _current_params(model: Model, state):
    return [model.phi[model.key_of(n, state)] for n in range(model.num_nodes)]


def global_log_survival(model: Model, state, clocks, s):
    """log P(no transition within s | state, clocks); vectorized over s."""
    s_arr = np.asarray(s, dtype=float)
    out = np.zeros(s_arr.shape, dtype=float)
    for n, p in enumerate(_current_params(model, state)):
        tau = clocks[n]
        out += log_survival(p, tau + s_arr) - log_survival(p, tau)
    if np.isscalar(s):
        return float(out)
    return out


def total_hazard(model: Model, state, clocks, s):
    """Sum of per-node hazards at elapsed s; vectorized over s."""
    s_arr = np.asarray(s, dtype=float)
    out = np.zeros(s_arr.shape, dtype=float)
    for n, p in enumerate(_current_params(model, state)):
        out += hazard(p, clocks[n] + s_arr)
    if np.isscalar(s):
        return float(out)
    return out


def global_log_density(model: Model, state, clocks, s):
    """log density of the next-event time at elapsed s; vectorized over s."""
    surv = global_log_survival(model, state, clocks, s)
    with np.errstate(divide="ignore"):
        log_haz = np.log(total_hazard(model, state, clocks, s))
    out = surv + log_haz
    if np.isscalar(s):
        return float(out)
    return out


def transition_probabilities(model: Model, state, clocks, s: float) -> np.ndarray:
    """P(node n fires | transition at elapsed s); proportional to its hazard."""
    haz = np.array(
        [hazard(p, clocks[n] + s) for n, p in enumerate(_current_params(model, state))]
    )
    total = haz.sum()
    if not (math.isfinite(total) and total > 0.0):
        raise StalledProcessError(f"total hazard {total} at s = {s}")
    return haz / total


def _draw_target(theta, u: float) -> int:
    cum = 0.0
    last = None
    for x, w in enumerate(theta):
        if w <= 0.0:
            continue
        cum += w
        last = x
        if u < cum:
            return x
    return last  # u landed in the rounding gap above the final cumsum


def gillespie(
    model: Model,
    end_time: float | None = None,
    *,
    rng: np.random.Generator,
    initial_state=None,
    initial_clocks=None,
    max_events: int | None = None,
) -> Trajectory:
    """Sample one trajectory by the competing-clocks race.

    Stops at end_time (final window censored there) or after max_events
    events; with max_events the end time is the censored arrival time of the
    first event not emitted, so the final window stays a proper censored one.
    At least one stopping rule is required.

    RNG consumption per step is fixed: one residual draw per node in id
    order, then one uniform for the landing state (consumed even when the
    landing state is forced).
    """
    if end_time is None and max_events is None:
        raise ModelError("need end_time and/or max_events")
    if end_time is not None and not (math.isfinite(end_time) and end_time > 0.0):
        raise ModelError("end_time must be finite and > 0")
    if max_events is not None and max_events < 0:
        raise ModelError("max_events must be >= 0")

    n_nodes = model.num_nodes
    state = list(initial_state) if initial_state is not None else [0] * n_nodes
    if len(state) != n_nodes:
        raise ModelError("initial_state length mismatch")
    for n, x in enumerate(state):
        if x < 0 or x >= model.cardinalities[n]:
            raise ModelError(f"initial state {x} out of range for node {n}")
    clocks = list(initial_clocks) if initial_clocks is not None else [0.0] * n_nodes
    if len(clocks) != n_nodes:
        raise ModelError("initial_clocks length mismatch")
    if any(c < 0.0 or not math.isfinite(c) for c in clocks):
        raise ModelError("initial clocks must be finite and >= 0")
    init_state = tuple(state)
    init_clocks = tuple(clocks) if initial_clocks is not None else None

    events: list[Event] = []
    t = 0.0
    cap = max_events if max_events is not None else _MAX_EVENTS_GUARD
    while True:
        residuals = [
            sample_truncated(model.phi[model.key_of(n, state)], clocks[n], rng)
            for n in range(n_nodes)
        ]
        s = min(residuals)
        winner = residuals.index(s)
        u_target = rng.random()
        if not math.isfinite(s):
            raise StalledProcessError("non-finite residual draw")
        arrival = t + s
        if end_time is not None and arrival >= end_time:
            final_end = end_time
            break
        if len(events) >= cap:
            if max_events is None:
                raise StalledProcessError(f"exceeded {cap} events before end_time")
            final_end = arrival
            break
        target = _draw_target(model.theta[model.key_of(winner, state)], u_target)
        events.append(Event(t=arrival, node=winner, state=target))
        for n in range(n_nodes):
            clocks[n] += s
        clocks[winner] = 0.0
        state[winner] = target
        t = arrival

    traj = Trajectory(
        initial=init_state, events=tuple(events), end_time=final_end, initial_clocks=init_clocks
    )
    validate_trajectory(traj, model.cardinalities)
    return traj


def trajectory_prefix(traj: Trajectory, num_events: int) -> Trajectory:
    """First num_events events, censored at the arrival of the next one.

    Matches the max_events stopping rule of gillespie: the prefix ends at the
    first un-kept event's time, so its final window is a proper censored
    window.  Requires the source trajectory to reach past num_events.
    """
    if num_events < 0:
        raise ModelError("num_events must be >= 0")
    if num_events >= len(traj.events):
        if num_events > len(traj.events):
            raise ModelError(
                f"trajectory has {len(traj.events)} events, cannot take {num_events}"
            )
        return traj
    return Trajectory(
        initial=traj.initial,
        events=traj.events[:num_events],
        end_time=traj.events[num_events].t,
        initial_clocks=traj.initial_clocks,
    )
