"""GeneNetWeaver time-series ingestion.

Input is the DREAM4-style TSV: a header row (time column, then gene names)
followed by sample rows; blank lines separate independent experiments, and a
repeated header starting a block is tolerated.  Expression values in [0, 1]
are thresholded into binary levels which hold between samples and switch
instantly at the sample where the crossing shows up.  Crossings that land on
the same sample time are serialized with a tiny offset (ascending node order)
so event times stay strictly ordered; a crossing at the final sample would
coincide with the end of the observation window and is dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParseError
from .model import Event, Trajectory

EPSILON = 1e-9
DEFAULT_THRESHOLD = 0.5
DEFAULT_MIN_TRANSITIONS = 8


@dataclass(frozen=True)
class TimeSeries:
    """One experiment block: sample times, values (samples x genes), names."""

    times: np.ndarray
    values: np.ndarray
    names: tuple


def load_timeseries(path) -> list[TimeSeries]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_timeseries(fh, source=str(path))


def parse_timeseries(lines, source: str = "<input>") -> list[TimeSeries]:
    """Parse blank-line-separated experiment blocks; errors carry line numbers."""
    header = None
    blocks: list[list[tuple[int, list[str]]]] = []
    current: list[tuple[int, list[str]]] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip():
            if current:
                blocks.append(current)
                current = []
            continue
        cells = line.split("\t")
        if header is None:
            if len(cells) < 2:
                raise ParseError(f"{source} line {lineno}: header needs time plus genes")
            header = [c.strip().strip('"') for c in cells]
            continue
        if [c.strip().strip('"') for c in cells] == header:
            if current:
                blocks.append(current)
                current = []
            continue
        current.append((lineno, cells))
    if current:
        blocks.append(current)
    if header is None:
        raise ParseError(f"{source}: empty input")

    names = tuple(header[1:])
    out = []
    for block in blocks:
        times, rows = [], []
        for lineno, cells in block:
            if len(cells) != len(names) + 1:
                raise ParseError(
                    f"{source} line {lineno}: expected {len(names) + 1} columns, got {len(cells)}"
                )
            try:
                times.append(float(cells[0]))
                rows.append([float(c) for c in cells[1:]])
            except ValueError as exc:
                raise ParseError(f"{source} line {lineno}: {exc}") from None
            if len(times) > 1 and times[-1] <= times[-2]:
                raise ParseError(
                    f"{source} line {lineno}: sample times must strictly increase"
                )
        out.append(TimeSeries(np.asarray(times), np.asarray(rows), names))
    return out


def discretize(ts: TimeSeries, threshold: float = DEFAULT_THRESHOLD) -> Trajectory:
    """Threshold one experiment into a binary-levels trajectory.

    Level 1 iff value >= threshold; levels hold until the next sample.  All
    values must lie in [0, 1].
    """
    if ts.values.ndim != 2 or ts.values.shape[0] < 2:
        raise ParseError("need at least two samples to discretize")
    if np.any(ts.values < 0.0) or np.any(ts.values > 1.0):
        raise ParseError("expression values must lie in [0, 1]")
    levels = (ts.values >= threshold).astype(int)
    initial = tuple(int(v) for v in levels[0])
    end_time = float(ts.times[-1])
    events = []
    for i in range(1, len(ts.times)):
        t = float(ts.times[i])
        changed = [n for n in range(levels.shape[1]) if levels[i, n] != levels[i - 1, n]]
        if t >= end_time and changed:
            continue  # a switch at the window end has no following window
        for j, n in enumerate(changed):
            events.append(Event(t=t + j * EPSILON, node=n, state=int(levels[i, n])))
    return Trajectory(initial=initial, events=tuple(events), end_time=end_time)


def filter_min_transitions(trajs, min_transitions: int = DEFAULT_MIN_TRANSITIONS):
    """Keep trajectories with at least min_transitions events."""
    return [tr for tr in trajs if len(tr.events) >= min_transitions]


def ingest(path, threshold: float = DEFAULT_THRESHOLD,
           min_transitions: int = DEFAULT_MIN_TRANSITIONS) -> list[Trajectory]:
    """Full pipeline: parse, discretize each block, drop short trajectories."""
    series = load_timeseries(path)
    return filter_min_transitions(
        [discretize(ts, threshold) for ts in series], min_transitions
    )
