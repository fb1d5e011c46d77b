"""CSV writers and readers for run records, snapshots and result tables.

Floats are written with ``repr`` (shortest round-trip decimal), files are
UTF-8 with LF line endings, so reading a file back gives bit-identical values
and identical inputs give byte-identical files.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .stepping import COLUMNS, RunRecord, StepRow

TIMESERIES_HEADER = ",".join(COLUMNS)
CONVERGENCE_HEADER = "n_steps,max_ratio,err_h1,err_sup,order_h1,order_sup"
BUBBLE_HEADER = "t,measured_radius,predicted_radius"

_INT_COLUMNS = {"step", "pred_iters", "corr_iters"}


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


def _write_lines(path, lines: Iterable[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line)
            fh.write("\n")


def _data_lines(path) -> list[str]:
    with open(path, encoding="utf-8", newline="") as fh:
        return [ln.rstrip("\r\n") for ln in fh]


def write_table(path, header: str, rows: Iterable[Sequence]) -> None:
    _write_lines(path, [header, *(",".join(fmt(v) for v in row) for row in rows)])


def write_timeseries(record: RunRecord, path) -> None:
    write_table(path, TIMESERIES_HEADER, record.rows)


def read_timeseries(path) -> list[StepRow]:
    lines = _data_lines(path)
    if not lines or lines[0] != TIMESERIES_HEADER:
        raise ValueError(f"{path}: not a time-series file (bad header)")
    rows = []
    for k, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(COLUMNS):
            raise ValueError(f"{path}:{k}: expected {len(COLUMNS)} fields, got {len(parts)}")
        rows.append(StepRow(*(int(v) if c in _INT_COLUMNS else float(v) for c, v in zip(COLUMNS, parts))))
    return rows


def write_snapshot(state: np.ndarray, t: float, h: float, path, binary: bool = False) -> None:
    """Write an (M, M) field as CSV with ``# t=``, ``# M=``, ``# h=`` header lines.

    With ``binary=True`` a raw little-endian float64 copy (row-major) is also
    written next to it with suffix ``.f64``.
    """
    state = np.asarray(state, dtype=np.float64)
    if state.ndim != 2 or state.shape[0] != state.shape[1]:
        raise ValueError(f"snapshot must be a square field, got shape {state.shape}")
    m = state.shape[0]
    head = [f"# t={fmt(t)}", f"# M={m}", f"# h={fmt(h)}"]
    _write_lines(path, head + [",".join(map(repr, row.tolist())) for row in state])
    if binary:
        state.astype("<f8").tofile(Path(path).with_suffix(".f64"))


def read_snapshot(path) -> tuple[np.ndarray, float, float]:
    """Return ``(state, t, h)``."""
    lines = _data_lines(path)
    meta = {}
    k = 0
    while k < len(lines) and lines[k].startswith("#"):
        key, _, value = lines[k][1:].strip().partition("=")
        meta[key] = value
        k += 1
    try:
        t, m, h = float(meta["t"]), int(meta["M"]), float(meta["h"])
    except KeyError as err:
        raise ValueError(f"{path}: missing header line {err.args[0]!r}") from None
    body = lines[k:]
    if len(body) != m:
        raise ValueError(f"{path}: expected {m} rows, found {len(body)}")
    state = np.array([[float(v) for v in row.split(",")] for row in body])
    if state.shape != (m, m):
        raise ValueError(f"{path}: expected {m} columns per row")
    return state, t, h


def read_binary_snapshot(path, m: int) -> np.ndarray:
    return np.fromfile(path, dtype="<f8").reshape(m, m)


def write_convergence(rows, path) -> None:
    write_table(
        path,
        CONVERGENCE_HEADER,
        ((r.n_steps, r.max_ratio, r.err_h1, r.err_sup, r.order_h1, r.order_sup) for r in rows),
    )


def write_bubble(report, path) -> None:
    write_table(path, BUBBLE_HEADER, zip(report.times, report.measured, report.predicted))


def format_float(x: float) -> str:
    """Short human form for console summaries."""
    return "nan" if math.isnan(x) else f"{x:.6g}"
