"""File formats: model JSON and trajectory JSONL.

Model JSON:
  {"nodes": [{"cardinality": 2}, ...],
   "edges": [[src, dst], ...],
   "family": "weibull",
   "phi":   {"n/x/u": [param, ...], ...},
   "theta": {"n/x/u": [prob over full state space], ...}}

Trajectory JSONL: one header record {"init": [...], "end_time": T}
(optionally "clocks": [...]) followed by one {"t": .., "node": .., "state": ..}
record per event.  Multiple trajectories are concatenated; a new header starts
the next one.  Serialization is deterministic (sorted keys, repr floats).
"""

from __future__ import annotations

import json
from typing import Iterable, Iterator

from .errors import ParseError
from .model import Event, Graph, Model, Trajectory, key_from_str, key_to_str
from .survival import Family


def model_to_dict(model: Model) -> dict:
    return {
        "nodes": [{"cardinality": c} for c in model.cardinalities],
        "edges": [[src, dst] for src, dst in model.graph.edges()],
        "family": model.family.value,
        "phi": {key_to_str(k): list(p.params) for k, p in model.phi.items()},
        "theta": {key_to_str(k): list(v) for k, v in model.theta.items()},
    }


def model_from_dict(data: dict) -> Model:
    try:
        nodes = data["nodes"]
        cards = tuple(int(nd["cardinality"]) for nd in nodes)
        graph = Graph.from_edges(len(nodes), data.get("edges", []))
        family = Family(data["family"])
        phi = {key_from_str(k): tuple(v) for k, v in data["phi"].items()}
        theta = {key_from_str(k): tuple(v) for k, v in data["theta"].items()}
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed model JSON: {exc}") from None
    return Model(graph, cards, family, phi, theta)


def dump_model(model: Model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> Model:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from None
    return model_from_dict(data)


def trajectory_to_lines(traj: Trajectory) -> Iterator[str]:
    header = {"init": list(traj.initial), "end_time": traj.end_time}
    if traj.initial_clocks is not None:
        header["clocks"] = list(traj.initial_clocks)
    yield json.dumps(header, sort_keys=True)
    for ev in traj.events:
        yield json.dumps({"t": ev.t, "node": ev.node, "state": ev.state}, sort_keys=True)


def dump_trajectories(trajs: Iterable[Trajectory], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for traj in trajs:
            for line in trajectory_to_lines(traj):
                fh.write(line)
                fh.write("\n")


def parse_trajectories(lines: Iterable[str], source: str = "<input>") -> list[Trajectory]:
    """Parse concatenated trajectory JSONL; raises ParseError with line numbers."""
    trajs: list[Trajectory] = []
    header = None
    events: list[Event] = []

    def flush():
        if header is not None:
            trajs.append(
                Trajectory(
                    initial=tuple(int(x) for x in header["init"]),
                    events=tuple(events),
                    end_time=float(header["end_time"]),
                    initial_clocks=(
                        tuple(float(c) for c in header["clocks"])
                        if "clocks" in header
                        else None
                    ),
                )
            )

    for lineno, raw in enumerate(lines, start=1):
        raw = raw.strip()
        if not raw:
            continue
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{source} line {lineno}: {exc}") from None
        if not isinstance(rec, dict):
            raise ParseError(f"{source} line {lineno}: expected a JSON object")
        if "init" in rec:
            if "end_time" not in rec:
                raise ParseError(f"{source} line {lineno}: header missing end_time")
            flush()
            header, events = rec, []
        elif {"t", "node", "state"} <= rec.keys():
            if header is None:
                raise ParseError(f"{source} line {lineno}: event before any header")
            events.append(Event(t=float(rec["t"]), node=int(rec["node"]), state=int(rec["state"])))
        else:
            raise ParseError(f"{source} line {lineno}: unrecognized record")
    flush()
    return trajs


def load_trajectories(path) -> list[Trajectory]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_trajectories(fh, source=str(path))
