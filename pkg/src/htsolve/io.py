"""Trace files: versioned CSV (one row per inner step) and a JSON summary."""

from __future__ import annotations

import csv
import json
import os

from .solver import TRACE_COLUMNS, TRACE_VERSION

HEADER_PREFIX = "# htsolve-trace v"
INT_COLUMNS = {"k", "j", "max_rank_iterate", "max_rank_intermediate", "supp_total", "ops_cum"}


class TraceFormatError(ValueError):
    """Malformed trace file; the message carries the offending line number."""


def write_trace_csv(path, trace):
    rows = [s.row() for s in trace.steps]
    write_rows_csv(path, rows)


def write_rows_csv(path, rows):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"{HEADER_PREFIX}{TRACE_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in rows:
            w.writerow([_fmt(c, x) for c, x in zip(TRACE_COLUMNS, r)])


def _fmt(col, x):
    return str(int(x)) if col in INT_COLUMNS else repr(float(x))


def read_trace_csv(path):
    """List of dicts keyed by TRACE_COLUMNS."""
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith(HEADER_PREFIX):
        raise TraceFormatError(f"{path}:1: missing version header")
    try:
        version = int(lines[0][len(HEADER_PREFIX):])
    except ValueError:
        raise TraceFormatError(f"{path}:1: bad version header {lines[0]!r}") from None
    if version != TRACE_VERSION:
        raise TraceFormatError(f"{path}:1: unsupported trace version {version}")
    if len(lines) < 2 or tuple(lines[1].split(",")) != TRACE_COLUMNS:
        raise TraceFormatError(f"{path}:2: unexpected column header")
    out = []
    for lineno, row in enumerate(csv.reader(lines[2:]), start=3):
        if not row:
            continue
        if len(row) != len(TRACE_COLUMNS):
            raise TraceFormatError(f"{path}:{lineno}: expected {len(TRACE_COLUMNS)} fields, got {len(row)}")
        rec = {}
        for c, x in zip(TRACE_COLUMNS, row):
            try:
                rec[c] = int(x) if c in INT_COLUMNS else float(x)
            except ValueError:
                raise TraceFormatError(f"{path}:{lineno}: bad value {x!r} in column {c}") from None
        out.append(rec)
    return out


def write_summary_json(path, trace, extra=None):
    data = trace.to_dict()
    if extra:
        data.update(extra)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def read_summary_json(path):
    with open(path) as fh:
        data = json.load(fh)
    if data.get("version") != TRACE_VERSION:
        raise TraceFormatError(f"{path}: unsupported summary version {data.get('version')}")
    return data


def _json_default(x):
    import numpy as np
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serializable: {type(x).__name__}")
