"""Core model types: directed graph, clocked transition model, trajectories.

A model has N discrete nodes; node n carries a clock that resets on n's own
transitions and keeps running through everyone else's.  Holding behaviour is
keyed by (node, own state, parent-state index): each key owns one survival
law phi and one categorical theta over landing states.

Parent-state indexing is mixed radix over the parent list in ascending node
order with the first (lowest-id) parent least significant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidTrajectoryError, ModelError
from .survival import FAMILY_ARITY, Family, SurvivalParams

NodeId = int
Key = tuple[int, int, int]  # (node, own state, parent-state index)

_THETA_TOL = 1e-9


@dataclass(frozen=True)
class Graph:
    """Directed graph as per-node parent tuples (sorted, no self-loops)."""

    num_nodes: int
    parents: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.num_nodes < 1:
            raise ModelError("graph needs at least one node")
        if len(self.parents) != self.num_nodes:
            raise ModelError("parents list length must equal num_nodes")
        normalized = []
        for n, ps in enumerate(self.parents):
            ps = tuple(int(p) for p in ps)
            if any(p < 0 or p >= self.num_nodes for p in ps):
                raise ModelError(f"node {n}: parent id out of range")
            if n in ps:
                raise ModelError(f"node {n}: self-loop not allowed")
            if len(set(ps)) != len(ps):
                raise ModelError(f"node {n}: duplicate parent")
            normalized.append(tuple(sorted(ps)))
        object.__setattr__(self, "parents", tuple(normalized))

    @classmethod
    def from_edges(cls, num_nodes: int, edges) -> "Graph":
        parents = [[] for _ in range(num_nodes)]
        for src, dst in edges:
            src, dst = int(src), int(dst)
            if dst < 0 or dst >= num_nodes:
                raise ModelError(f"edge ({src}, {dst}): target out of range")
            parents[dst].append(src)
        return cls(num_nodes, tuple(tuple(ps) for ps in parents))

    def edges(self) -> list[tuple[int, int]]:
        return [(p, n) for n in range(self.num_nodes) for p in self.parents[n]]

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.num_nodes, self.num_nodes), dtype=int)
        for p, n in self.edges():
            adj[p, n] = 1
        return adj


def check_cardinalities(cardinalities, num_nodes: int) -> tuple[int, ...]:
    cards = tuple(int(c) for c in cardinalities)
    if len(cards) != num_nodes:
        raise ModelError("cardinalities length must equal num_nodes")
    if any(c < 2 for c in cards):
        raise ModelError("every node needs cardinality >= 2")
    return cards


def num_parent_states(graph: Graph, cardinalities, node: int) -> int:
    out = 1
    for p in graph.parents[node]:
        out *= cardinalities[p]
    return out


def parent_state_index(graph: Graph, cardinalities, node: int, state) -> int:
    """Mixed-radix index of the parent configuration inside a full state.

    Parents are taken in ascending id order; the first parent is the least
    significant digit.
    """
    idx = 0
    mult = 1
    for p in graph.parents[node]:
        xp = int(state[p])
        if xp < 0 or xp >= cardinalities[p]:
            raise ModelError(f"state[{p}] = {xp} out of range")
        idx += xp * mult
        mult *= cardinalities[p]
    return idx


def parent_index_to_states(graph: Graph, cardinalities, node: int, index: int) -> dict[int, int]:
    """Inverse of parent_state_index: parent id -> parent state."""
    out = {}
    rem = int(index)
    for p in graph.parents[node]:
        out[p] = rem % cardinalities[p]
        rem //= cardinalities[p]
    if rem != 0:
        raise ModelError(f"parent-state index {index} out of range for node {node}")
    return out


def all_keys(graph: Graph, cardinalities):
    """Iterate (node, state, parent-state index) keys in ascending order."""
    for n in range(graph.num_nodes):
        for x in range(cardinalities[n]):
            for u in range(num_parent_states(graph, cardinalities, n)):
                yield (n, x, u)


@dataclass(frozen=True)
class Event:
    t: float
    node: int
    state: int


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-constant sample path over a closed observation window.

    Events are strictly ordered in (0, end_time); the window after the last
    event is censored at end_time.  initial_clocks defaults to all zeros.
    """

    initial: tuple[int, ...]
    events: tuple[Event, ...]
    end_time: float
    initial_clocks: tuple[float, ...] | None = None

    @property
    def num_nodes(self) -> int:
        return len(self.initial)

    @property
    def num_events(self) -> int:
        return len(self.events)


def validate_trajectory(traj: Trajectory, cardinalities=None) -> None:
    """Raise InvalidTrajectoryError on ordering, range, or self-transition faults."""
    n_nodes = traj.num_nodes
    if n_nodes == 0:
        raise InvalidTrajectoryError("empty initial state")
    if not (math.isfinite(traj.end_time) and traj.end_time > 0.0):
        raise InvalidTrajectoryError("end_time must be finite and > 0")
    if traj.initial_clocks is not None:
        if len(traj.initial_clocks) != n_nodes:
            raise InvalidTrajectoryError("initial_clocks length mismatch")
        if any(not math.isfinite(c) or c < 0.0 for c in traj.initial_clocks):
            raise InvalidTrajectoryError("initial clocks must be finite and >= 0")

    def check_state(node, x, where):
        if cardinalities is not None:
            if x < 0 or x >= cardinalities[node]:
                raise InvalidTrajectoryError(f"{where}: state {x} out of range for node {node}")
        elif x < 0:
            raise InvalidTrajectoryError(f"{where}: negative state")

    for n, x in enumerate(traj.initial):
        check_state(n, x, "initial state")

    state = list(traj.initial)
    t_prev = 0.0
    for i, ev in enumerate(traj.events):
        if not math.isfinite(ev.t) or ev.t <= t_prev:
            raise InvalidTrajectoryError(f"event {i}: time {ev.t} not strictly increasing")
        if ev.t >= traj.end_time:
            raise InvalidTrajectoryError(f"event {i}: time {ev.t} not inside (0, end_time)")
        if ev.node < 0 or ev.node >= n_nodes:
            raise InvalidTrajectoryError(f"event {i}: node {ev.node} out of range")
        check_state(ev.node, ev.state, f"event {i}")
        if ev.state == state[ev.node]:
            raise InvalidTrajectoryError(f"event {i}: self-transition on node {ev.node}")
        state[ev.node] = ev.state
        t_prev = ev.t


@dataclass(frozen=True)
class Window:
    """One holding regime of one node: constant key between regime boundaries.

    entry_clock/exit_clock are the node-clock readings at the boundaries
    (exit strictly greater).  closed means the regime ended with the node's
    own transition into `target`; otherwise the window is censored (a parent
    changed, or the observation ended).
    """

    node: int
    state: int
    parent_index: int
    entry_clock: float
    exit_clock: float
    closed: bool
    target: int | None = None

    @property
    def key(self) -> Key:
        return (self.node, self.state, self.parent_index)


def derive_windows(traj: Trajectory, graph: Graph, cardinalities) -> list[Window]:
    """Split a trajectory into per-node holding windows.

    A node's regime breaks only on its own transitions and on parent-state
    changes; other nodes' events leave the survival factors telescoping, so
    no window boundary is emitted for them.
    """
    validate_trajectory(traj, cardinalities)
    n_nodes = traj.num_nodes
    state = list(traj.initial)
    clocks = list(traj.initial_clocks) if traj.initial_clocks is not None else [0.0] * n_nodes
    entry = clocks.copy()
    u_idx = [parent_state_index(graph, cardinalities, n, state) for n in range(n_nodes)]

    windows: list[Window] = []
    t_prev = 0.0
    for ev in traj.events:
        elapsed = ev.t - t_prev
        for n in range(n_nodes):
            clocks[n] += elapsed
        w = ev.node
        windows.append(
            Window(w, state[w], u_idx[w], entry[w], clocks[w], closed=True, target=ev.state)
        )
        state[w] = ev.state
        clocks[w] = 0.0
        entry[w] = 0.0
        for m in range(n_nodes):
            if m != w and w in graph.parents[m]:
                windows.append(
                    Window(m, state[m], u_idx[m], entry[m], clocks[m], closed=False)
                )
                entry[m] = clocks[m]
                u_idx[m] = parent_state_index(graph, cardinalities, m, state)
        t_prev = ev.t

    elapsed = traj.end_time - t_prev
    for n in range(n_nodes):
        windows.append(
            Window(n, state[n], u_idx[n], entry[n], clocks[n] + elapsed, closed=False)
        )
    return windows


@dataclass(frozen=True)
class Model:
    """Graph plus per-key survival parameters and transition categoricals.

    phi maps every key to SurvivalParams of `family`; theta maps every key to
    a tuple over the node's full state space with theta[own state] == 0 and
    the rest summing to 1.
    """

    graph: Graph
    cardinalities: tuple[int, ...]
    family: Family
    phi: dict[Key, SurvivalParams] = field(repr=False)
    theta: dict[Key, tuple] = field(repr=False)

    def __post_init__(self):
        cards = check_cardinalities(self.cardinalities, self.graph.num_nodes)
        object.__setattr__(self, "cardinalities", cards)
        family = Family(self.family)
        object.__setattr__(self, "family", family)
        keys = list(all_keys(self.graph, cards))
        missing = [k for k in keys if k not in self.phi]
        if missing:
            raise ModelError(f"phi missing keys, e.g. {missing[0]}")
        missing = [k for k in keys if k not in self.theta]
        if missing:
            raise ModelError(f"theta missing keys, e.g. {missing[0]}")
        if len(self.phi) != len(keys) or len(self.theta) != len(keys):
            raise ModelError("phi/theta carry keys outside the model")
        norm_theta = {}
        for key in keys:
            n, x, _ = key
            p = self.phi[key]
            if not isinstance(p, SurvivalParams):
                p = SurvivalParams(family, tuple(p))
                self.phi[key] = p
            if p.family is not family:
                raise ModelError(f"phi[{key}] family {p.family.value} != model family")
            th = np.asarray(self.theta[key], dtype=float)
            if th.shape != (cards[n],):
                raise ModelError(f"theta[{key}] must have length {cards[n]}")
            if np.any(th < 0.0) or th[x] != 0.0:
                raise ModelError(f"theta[{key}] must be >= 0 with zero mass on state {x}")
            total = th.sum()
            if abs(total - 1.0) > _THETA_TOL:
                raise ModelError(f"theta[{key}] sums to {total}, expected 1")
            norm_theta[key] = tuple(float(v) for v in th)
        object.__setattr__(self, "theta", norm_theta)

    @property
    def num_nodes(self) -> int:
        return self.graph.num_nodes

    def key_of(self, node: int, state) -> Key:
        """Key addressing node's current regime inside full state vector."""
        return (
            node,
            int(state[node]),
            parent_state_index(self.graph, self.cardinalities, node, state),
        )


def key_to_str(key: Key) -> str:
    return f"{key[0]}/{key[1]}/{key[2]}"


def key_from_str(text: str) -> Key:
    parts = text.split("/")
    if len(parts) != 3:
        raise ModelError(f"bad key {text!r}, expected 'node/state/parent-index'")
    try:
        return (int(parts[0]), int(parts[1]), int(parts[2]))
    except ValueError as exc:
        raise ModelError(f"bad key {text!r}: {exc}") from None
