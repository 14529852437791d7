"""CSV and JSON report writers with diff-stable number formatting."""

from __future__ import annotations

import csv
import io
import json
import math

import numpy as np
from jsonschema import Draft202012Validator

__all__ = [
    "SOLUTION_COLUMNS",
    "REPORT_SCHEMA",
    "solution_rows",
    "solution_csv",
    "table_csv",
    "to_jsonable",
    "dumps_report",
    "validate_report",
]

SOLUTION_COLUMNS = ("step", "index", "t", "B", "Y", "Z", "K", "L")

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["tool", "version", "action", "status", "config", "result"],
    "properties": {
        "tool": {"const": "rbsde"},
        "version": {"type": "string"},
        "action": {"type": "string"},
        "status": {"enum": ["ok", "check-failed", "error"]},
        "config": {"type": ["object", "null"]},
        "result": {"type": ["object", "null"]},
        "checks": {"type": "object"},
        "error": {
            "type": "object",
            "required": ["type", "message", "exit_status"],
            "properties": {
                "type": {"type": "string"},
                "message": {"type": "string"},
                "exit_status": {"type": "integer"},
            },
        },
    },
}


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def solution_rows(solution):
    lat = solution.lattice
    n = lat.steps
    for i in range(n + 1):
        t = lat.time(i)
        for j in range(i + 1):
            yield (
                i, j, t,
                float(lat.nodes[i][j]),
                float(solution.Y[i][j]),
                float(solution.Z[i][j]) if i < n else None,
                float(solution.K[i][j]),
                float(solution.barrier[i][j]) if solution.barrier is not None else None,
            )


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


def solution_csv(solution):
    """RFC-4180 CSV of ``(step, index, t, B, Y, Z, K, L)``; ``Z`` is empty at maturity."""
    return _csv_text(SOLUTION_COLUMNS, solution_rows(solution))


def table_csv(rows):
    """CSV for a list of flat dicts sharing the same keys."""
    rows = list(rows)
    if not rows:
        return ""
    header = list(rows[0])
    return _csv_text(header, ([r[k] for k in header] for r in rows))


def to_jsonable(obj):
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return obj


def dumps_report(report):
    """Serialise with sorted keys; floats use the shortest round-trip repr."""
    return json.dumps(to_jsonable(report), indent=2, sort_keys=True, allow_nan=False) + "\n"


def validate_report(report):
    Draft202012Validator(REPORT_SCHEMA).validate(report)
    return report
