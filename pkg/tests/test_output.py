import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mbpcn.experiments import init_bubble
from mbpcn.grid import Domain2D
from mbpcn.output import (
    TIMESERIES_HEADER,
    read_binary_snapshot,
    read_snapshot,
    read_timeseries,
    write_snapshot,
    write_timeseries,
)
from mbpcn.stepping import RunRecord, StepRow

finite = st.floats(allow_nan=False, allow_infinity=False)


def test_header_only_for_empty_record(tmp_path):
    p = tmp_path / "ts.csv"
    write_timeseries(RunRecord(), p)
    assert p.read_bytes() == b"step,t,tau,sup_norm,energy,pred_iters,corr_iters,mbp_margin\n"
    assert read_timeseries(p) == []


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 10**9), finite, finite, finite, finite, st.integers(0, 10**6), st.integers(0, 10**6), finite), max_size=5))
def test_timeseries_round_trip(tmp_path_factory, rows):
    p = tmp_path_factory.mktemp("ts") / "ts.csv"
    rec = RunRecord(rows=[StepRow(*r) for r in rows])
    write_timeseries(rec, p)
    back = read_timeseries(p)
    assert [tuple(r) for r in back] == [tuple(r) for r in rec.rows]
    for a, b in zip(back, rec.rows):
        assert all(math.copysign(1, x) == math.copysign(1, y) for x, y in zip(a, b) if isinstance(x, float))


def test_timeseries_is_lf_utf8(tmp_path):
    p = tmp_path / "ts.csv"
    write_timeseries(RunRecord(rows=[StepRow(0, 0.0, 0.0, 0.1, 0.2, 0, 0, 0.9)]), p)
    data = p.read_bytes()
    assert b"\r" not in data
    assert data.decode("utf-8").splitlines()[1] == "0,0.0,0.0,0.1,0.2,0,0,0.9"


def test_bad_header_rejected(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n")
    with pytest.raises(ValueError):
        read_timeseries(p)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6).flatmap(lambda m: arrays(np.float64, (m, m), elements=finite)), finite, st.floats(1e-6, 10))
def test_snapshot_round_trip(tmp_path_factory, state, t, h):
    if state.shape[0] < 2:
        state = np.tile(state, (2, 2))
    p = tmp_path_factory.mktemp("snap") / "s.csv"
    write_snapshot(state, t, h, p, binary=True)
    back, t2, h2 = read_snapshot(p)
    np.testing.assert_array_equal(back, state)
    assert (t2, h2) == (t, h)
    np.testing.assert_array_equal(read_binary_snapshot(p.with_suffix(".f64"), state.shape[0]), state)


def test_snapshot_header_and_alphabet(tmp_path):
    d = Domain2D(1.0, 16, centered=True)
    p = tmp_path / "b.csv"
    write_snapshot(init_bubble(d), 0.0, d.spacing, p)
    lines = p.read_text().splitlines()
    assert lines[:3] == ["# t=0.0", "# M=16", "# h=0.0625"]
    assert {v for row in lines[3:] for v in row.split(",")} == {"1.0", "-1.0"}


def test_identical_inputs_give_identical_bytes(tmp_path):
    rows = [StepRow(k, 0.1 * k, 0.1, 0.5, 1 / 3, 2, 3, 0.5) for k in range(4)]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_timeseries(RunRecord(rows=rows), a)
    write_timeseries(RunRecord(rows=list(rows)), b)
    assert a.read_bytes() == b.read_bytes()
    assert TIMESERIES_HEADER in a.read_text()
