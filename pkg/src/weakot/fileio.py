"""Measure and trace file formats.

Measures round-trip losslessly through CSV (header ``# d=<dim> n=<count>
weighted=<0|1>``, one point per row, 17 significant digits) or JSON
(``{dim, points, weights}``).  Headerless numeric CSVs -- e.g. exported
2-column cytometry tables -- load as uniform measures; a single
non-numeric first line is treated as a column-title row and skipped.
Traces serialize to JSON with one record per step.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .barycenters import BarycenterResult
from .errors import ParseError, UnsupportedFormat
from .measures import DiscreteMeasure, make_measure

__all__ = ["read_measure", "write_measure", "write_trace"]

FLOAT_FORMAT = "%.17g"


def write_measure(path, m: DiscreteMeasure) -> None:
    """Write a measure as CSV or JSON depending on the file suffix."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        payload = {
            "dim": m.dim,
            "points": [[float(v) for v in row] for row in m.points],
            "weights": [float(w) for w in m.weights],
        }
        path.write_text(json.dumps(payload) + "\n", encoding="utf-8")
        return
    if path.suffix.lower() != ".csv":
        raise UnsupportedFormat(f"unknown measure suffix {path.suffix!r}; use .csv or .json")
    lines = [f"# d={m.dim} n={m.n} weighted=1"]
    for row, w in zip(m.points, m.weights):
        fields = [FLOAT_FORMAT % v for v in row] + [FLOAT_FORMAT % w]
        lines.append(",".join(fields))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_float(token: str, line_no: int, column: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"not a number: {token!r}", line=line_no, column=column) from None


def _read_csv(path: Path) -> DiscreteMeasure:
    raw_lines = path.read_text(encoding="utf-8").splitlines()
    dim = None
    expect_n = None
    weighted = False
    rows: list[list[float]] = []
    weights: list[float] = []
    start = 0

    if raw_lines and raw_lines[0].lstrip().startswith("#"):
        header = raw_lines[0].lstrip("# ").split()
        fields = dict(part.split("=", 1) for part in header if "=" in part)
        try:
            dim = int(fields["d"])
            expect_n = int(fields["n"])
            weighted = fields["weighted"] == "1"
        except (KeyError, ValueError):
            raise ParseError(
                "malformed header; expected '# d=<dim> n=<count> weighted=<0|1>'", line=1
            ) from None
        start = 1
    elif raw_lines:
        # Headerless ingestion: tolerate one non-numeric column-title row.
        first = [t.strip() for t in raw_lines[0].split(",")]
        try:
            [float(t) for t in first]
        except ValueError:
            start = 1

    for line_no, line in enumerate(raw_lines[start:], start=start + 1):
        if not line.strip():
            continue
        tokens = [t.strip() for t in line.split(",")]
        if dim is None:
            dim = len(tokens)
        expected = dim + 1 if weighted else dim
        if len(tokens) != expected:
            raise ParseError(
                f"expected {expected} fields, found {len(tokens)}",
                line=line_no,
                column=min(len(tokens), expected) + 1,
            )
        values = [_parse_float(t, line_no, col + 1) for col, t in enumerate(tokens)]
        if weighted:
            rows.append(values[:-1])
            weights.append(values[-1])
        else:
            rows.append(values)

    if not rows:
        raise ParseError("no data rows", line=len(raw_lines) or 1)
    if expect_n is not None and len(rows) != expect_n:
        raise ParseError(
            f"header announced n={expect_n} rows but found {len(rows)}",
            line=len(raw_lines),
        )
    return make_measure(np.asarray(rows), np.asarray(weights) if weighted else None)


def _read_json(path: Path) -> DiscreteMeasure:
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno, column=exc.colno) from None
    try:
        points = np.asarray(payload["points"], dtype=float)
        dim = int(payload["dim"])
    except (KeyError, TypeError, ValueError):
        raise ParseError("measure JSON needs 'dim' and 'points'") from None
    if points.ndim != 2 or points.shape[1] != dim:
        raise ParseError(f"points of shape {points.shape} do not match dim={dim}")
    weights = payload.get("weights")
    return make_measure(points, None if weights is None else np.asarray(weights, dtype=float))


def read_measure(path) -> DiscreteMeasure:
    """Read a measure file (.csv or .json, including headerless CSV)."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        return _read_json(path)
    return _read_csv(path)


def write_trace(path, result: BarycenterResult, algorithm: str, provider: str) -> None:
    """Serialize an iteration trace: one record per step plus a converged flag."""
    payload = {
        "algorithm": algorithm,
        "provider": provider,
        "steps": [
            {
                "k": record.k,
                "energy": record.energy,
                "step_size": record.step_size,
                "support_diameter": record.support_diameter,
            }
            for record in result.steps
        ],
        "converged": result.converged,
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n", encoding="utf-8")
