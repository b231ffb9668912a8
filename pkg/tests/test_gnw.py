"""Time-series ingestion: parsing, thresholding, event serialization."""

import io
from pathlib import Path

import numpy as np
import pytest

from clockctbn.errors import ParseError
from clockctbn.gnw import (
    TimeSeries,
    discretize,
    filter_min_transitions,
    ingest,
    load_timeseries,
    parse_timeseries,
)
from clockctbn.io import dump_trajectories
from clockctbn.model import Event, validate_trajectory

FIXTURES = Path(__file__).parent / "fixtures"


def test_parse_blocks_and_headers():
    series = load_timeseries(FIXTURES / "gnw_timeseries.tsv")
    assert len(series) == 3
    assert series[0].names == ("G1", "G2", "G3")
    assert series[0].values.shape == (11, 3)
    assert series[1].values.shape == (4, 3)
    assert series[2].values.shape == (8, 3)
    np.testing.assert_array_equal(series[2].times, np.arange(8.0))


def test_ingest_matches_hand_derived_golden_file(tmp_path: Path):
    trajs = ingest(FIXTURES / "gnw_timeseries.tsv")
    assert len(trajs) == 2  # the one-transition block is dropped
    out = tmp_path / "out.jsonl"
    dump_trajectories(trajs, out)
    assert out.read_bytes() == (FIXTURES / "gnw_golden.jsonl").read_bytes()


def test_discretize_details():
    series = load_timeseries(FIXTURES / "gnw_timeseries.tsv")
    traj = discretize(series[0])
    assert traj.initial == (0, 1, 0)
    assert traj.end_time == 10.0
    assert len(traj.events) == 10
    # a value exactly at the threshold counts as the high level
    assert traj.events[4] == Event(4.0, 0, 1)
    # simultaneous crossings serialize in ascending node order
    assert traj.events[1] == Event(2.0, 1, 0)
    assert traj.events[2] == Event(2.0 + 1e-9, 2, 1)
    # the result is a valid trajectory (strictly ordered, no self-jumps)
    validate_trajectory(traj, (2, 2, 2))
    # crossings at the final sample are dropped, so the last regime persists
    assert traj.events[-1].t < traj.end_time


def test_custom_threshold_changes_levels():
    ts = TimeSeries(
        np.array([0.0, 1.0, 2.0]),
        np.array([[0.4, 0.9], [0.6, 0.2], [0.6, 0.2]]),
        ("a", "b"),
    )
    low = discretize(ts, threshold=0.3)
    assert low.initial == (1, 1)
    assert low.events == (Event(1.0, 1, 0),)
    high = discretize(ts, threshold=0.7)
    assert high.initial == (0, 1)
    assert high.events == (Event(1.0, 1, 0),)


def test_filter_min_transitions():
    trajs = ingest(FIXTURES / "gnw_timeseries.tsv", min_transitions=0)
    assert len(trajs) == 3
    assert [len(t.events) for t in trajs] == [10, 1, 9]
    assert len(filter_min_transitions(trajs, 10)) == 1


def test_parse_errors_carry_line_numbers():
    with pytest.raises(ParseError, match="line 3"):
        parse_timeseries(io.StringIO("t\tg1\n0.0\t0.5\n1.0\t0.2\t0.9\n"))
    with pytest.raises(ParseError, match="line 4"):
        parse_timeseries(io.StringIO("t\tg1\n0.0\t0.5\n1.0\t0.2\n1.0\t0.9\n"))
    with pytest.raises(ParseError, match="line 2"):
        parse_timeseries(io.StringIO("t\tg1\nzero\t0.5\n"))
    with pytest.raises(ParseError, match="empty"):
        parse_timeseries(io.StringIO(""))
    with pytest.raises(ParseError, match="header"):
        parse_timeseries(io.StringIO("justtime\n"))
    assert parse_timeseries(io.StringIO("t\tg1\n")) == []


def test_discretize_rejects_bad_values():
    with pytest.raises(ParseError, match=r"\[0, 1\]"):
        discretize(TimeSeries(np.array([0.0, 1.0]), np.array([[0.2], [1.5]]), ("a",)))
    with pytest.raises(ParseError, match="two samples"):
        discretize(TimeSeries(np.array([0.0]), np.array([[0.2]]), ("a",)))
