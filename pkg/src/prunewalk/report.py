"""Deterministic report emission: JSON with sorted keys, CSV for curves."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from fractions import Fraction

import numpy as np

TAIL_HEADER = ("t", "survival", "stderr")


class ReportError(OSError):
    """Output could not be written; the message carries the path."""


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return x
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if hasattr(x, "to_json"):
        return _plain(x.to_json())
    return x


def make_report(experiment: str, config: dict, per_seed=(), aggregate=None, failures=()) -> dict:
    return {
        "experiment": experiment,
        "config": config,
        "per_seed": list(per_seed),
        "aggregate": aggregate or {},
        "failures": list(failures),
    }


def render_json(report: dict) -> str:
    return json.dumps(_plain(report), sort_keys=True, indent=1) + "\n"


def render_csv(rows, header=TAIL_HEADER) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


def csv_rows(report: dict):
    """Rows for the CSV form: a tail curve if present, else the aggregate rows."""
    agg = report.get("aggregate", {})
    if "rows" in agg:
        return agg["rows"], tuple(agg.get("header", TAIL_HEADER))
    raise ReportError(f"experiment {report.get('experiment')!r} has no tabular form; use json")


def write_report(report: dict, path: str | None, fmt: str = "json") -> str:
    """Serialize the report; write it to path (stdout when None or '-')."""
    if fmt == "json":
        text = render_json(report)
    elif fmt == "csv":
        rows, header = csv_rows(report)
        text = render_csv(rows, header)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path in (None, "-"):
        return text
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent):
        raise ReportError(f"cannot write {path}: directory {parent} does not exist")
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return text
