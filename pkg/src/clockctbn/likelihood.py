"""Exact path likelihood and its sufficient statistics.

The density of a trajectory factorizes over (node, state, parent-state)
keys.  Each key contributes through three clock multisets:

  full   exit clocks of windows closed by the node's own transition
  cens   exit clocks of censored windows (parent change or observation end)
  trunc  entry clocks of windows that started at a positive clock reading

log-likelihood per key = sum log f(full) + sum log L(cens) - sum log L(trunc),
plus the categorical landing terms counted per target state.  The same value
can be accumulated interval by interval through the global holding law; the
two routes agree because unchanged-regime survival factors telescope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import Graph, Key, Model, Trajectory, Window, derive_windows
from .simulate import global_log_density, global_log_survival, transition_probabilities
from .survival import SurvivalParams, log_density, log_survival


@dataclass
class KeyStats:
    """Clock multisets and landing counts for one key."""

    full: list[float] = field(default_factory=list)
    cens: list[float] = field(default_factory=list)
    trunc: list[float] = field(default_factory=list)
    targets: np.ndarray = None  # counts over the node's full state space

    def merge(self, other: "KeyStats") -> None:
        self.full.extend(other.full)
        self.cens.extend(other.cens)
        self.trunc.extend(other.trunc)
        if self.targets is None:
            self.targets = None if other.targets is None else other.targets.copy()
        elif other.targets is not None:
            self.targets = self.targets + other.targets

    @property
    def num_transitions(self) -> int:
        return len(self.full)


class SuffStats:
    """Per-key sufficient statistics, mergeable across trajectories."""

    def __init__(self):
        self.stats: dict[Key, KeyStats] = {}

    def _get(self, key: Key, cardinality: int) -> KeyStats:
        ks = self.stats.get(key)
        if ks is None:
            ks = KeyStats(targets=np.zeros(cardinality, dtype=int))
            self.stats[key] = ks
        return ks

    def add_window(self, w: Window, cardinality: int) -> None:
        ks = self._get(w.key, cardinality)
        if w.closed:
            ks.full.append(w.exit_clock)
            ks.targets[w.target] += 1
        else:
            ks.cens.append(w.exit_clock)
        if w.entry_clock > 0.0:
            ks.trunc.append(w.entry_clock)

    def merge(self, other: "SuffStats") -> "SuffStats":
        for key, ks in other.stats.items():
            mine = self.stats.get(key)
            if mine is None:
                self.stats[key] = KeyStats(
                    full=list(ks.full),
                    cens=list(ks.cens),
                    trunc=list(ks.trunc),
                    targets=None if ks.targets is None else ks.targets.copy(),
                )
            else:
                mine.merge(ks)
        return self

    def items(self):
        return sorted(self.stats.items())

    def __getitem__(self, key: Key) -> KeyStats:
        return self.stats[key]

    def __contains__(self, key: Key) -> bool:
        return key in self.stats

    def to_dict(self) -> dict:
        out = {}
        for key, ks in self.items():
            out[f"{key[0]}/{key[1]}/{key[2]}"] = {
                "full": list(ks.full),
                "cens": list(ks.cens),
                "trunc": list(ks.trunc),
                "targets": [int(c) for c in ks.targets],
            }
        return out


def suff_stats(trajs, graph: Graph, cardinalities) -> SuffStats:
    """Accumulate sufficient statistics over one trajectory or a list."""
    if isinstance(trajs, Trajectory):
        trajs = [trajs]
    out = SuffStats()
    for traj in trajs:
        for w in derive_windows(traj, graph, cardinalities):
            out.add_window(w, cardinalities[w.node])
    return out


def stats_log_likelihood(ks: KeyStats, phi: SurvivalParams) -> float:
    """Holding-time log-likelihood of one key's stats under one survival law."""
    out = 0.0
    if ks.full:
        out += float(np.sum(log_density(phi, np.asarray(ks.full))))
    if ks.cens:
        out += float(np.sum(log_survival(phi, np.asarray(ks.cens))))
    if ks.trunc:
        out -= float(np.sum(log_survival(phi, np.asarray(ks.trunc))))
    return out


def window_log_likelihood(w: Window, phi: SurvivalParams, theta=None) -> float:
    """Contribution of one window; includes the landing term when closed."""
    if w.closed:
        out = log_density(phi, w.exit_clock)
        if theta is not None:
            out += math.log(theta[w.target])
    else:
        out = log_survival(phi, w.exit_clock)
    if w.entry_clock > 0.0:
        out -= log_survival(phi, w.entry_clock)
    return out


def trajectory_log_likelihood(traj, model: Model, per_node: bool = False):
    """Exact log-likelihood of one trajectory (or a list) under a model."""
    trajs = [traj] if isinstance(traj, Trajectory) else list(traj)
    node_tot = np.zeros(model.num_nodes)
    for tr in trajs:
        for w in derive_windows(tr, model.graph, model.cardinalities):
            node_tot[w.node] += window_log_likelihood(
                w, model.phi[w.key], model.theta[w.key]
            )
    if per_node:
        return float(node_tot.sum()), node_tot
    return float(node_tot.sum())


def interval_log_likelihood(traj: Trajectory, model: Model) -> float:
    """Same likelihood accumulated interval by interval via the global law.

    Each inter-event interval contributes the global holding density (or the
    global survival for the censored tail), the winner's share of the total
    hazard, and the landing categorical.  Kept as an independent route for
    cross-checking the telescoped factorization.
    """
    state = list(traj.initial)
    clocks = (
        list(traj.initial_clocks) if traj.initial_clocks is not None else [0.0] * traj.num_nodes
    )
    out = 0.0
    t_prev = 0.0
    for ev in traj.events:
        s = ev.t - t_prev
        out += global_log_density(model, state, clocks, s)
        probs = transition_probabilities(model, state, clocks, s)
        out += math.log(probs[ev.node])
        theta = model.theta[model.key_of(ev.node, state)]
        out += math.log(theta[ev.state])
        for n in range(traj.num_nodes):
            clocks[n] += s
        clocks[ev.node] = 0.0
        state[ev.node] = ev.state
        t_prev = ev.t
    out += global_log_survival(model, state, clocks, traj.end_time - t_prev)
    return out
