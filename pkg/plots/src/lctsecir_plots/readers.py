"""CSV/JSON readers with strict schema validation.

Every reader checks the header against the producing CLI's column contract
and reports missing or unexpected columns by name.  Readers never mutate
their inputs.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np


class SchemaError(Exception):
    """Input file exists but does not match the expected column contract."""


class InputError(Exception):
    """Input file is missing or unreadable."""


def _read_csv(path) -> tuple[list[str], np.ndarray]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"input file {path} does not exist")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path}: file is empty")
    header, body = rows[0], rows[1:]
    if not body:
        raise SchemaError(f"{path}: no data rows")
    try:
        values = np.array([[float(v) for v in row] for row in body])
    except ValueError as exc:
        raise SchemaError(f"{path}: non-numeric value ({exc})") from None
    if values.shape[1] != len(header):
        raise SchemaError(f"{path}: ragged rows")
    return header, values


def _check_exact(path, header, expected):
    missing = [c for c in expected if c not in header]
    extra = [c for c in header if c not in expected]
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"missing column(s) {missing}")
        if extra:
            parts.append(f"unexpected column(s) {extra}")
        raise SchemaError(f"{path}: {'; '.join(parts)}")


def read_series(path) -> tuple[str, np.ndarray, np.ndarray]:
    """Two-column series ``day,<name>``; returns (name, days, values)."""
    header, values = _read_csv(path)
    if len(header) != 2 or header[0] != "day":
        raise SchemaError(
            f"{path}: expected columns ['day', '<series name>'], got {header}")
    return header[1], values[:, 0], values[:, 1]


def read_trajectory(path) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Trajectory ``t,<group>_<compartment>...``; returns (cols, t, values)."""
    header, values = _read_csv(path)
    if not header or header[0] != "t":
        raise SchemaError(f"{path}: first column must be 't', got {header[:1]}")
    if len(header) < 2:
        raise SchemaError(f"{path}: missing column(s) ['<group>_<compartment>']")
    return header[1:], values[:, 0], values[:, 1:]


def read_peaks(path) -> dict[str, np.ndarray]:
    """Peak table; 'model' is a string column, so parse by hand."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"input file {path} does not exist")
    expected = ["reff", "model", "peak_value", "peak_day"]
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or len(rows) < 2:
        raise SchemaError(f"{path}: no data rows")
    _check_exact(path, rows[0], expected)
    if rows[0] != expected:
        raise SchemaError(f"{path}: columns must be ordered {expected}")
    out = {"reff": [], "model": [], "peak_value": [], "peak_day": []}
    try:
        for row in rows[1:]:
            out["reff"].append(float(row[0]))
            out["model"].append(row[1])
            out["peak_value"].append(float(row[2]))
            out["peak_day"].append(float(row[3]))
    except (ValueError, IndexError) as exc:
        raise SchemaError(f"{path}: malformed row ({exc})") from None
    return {k: (np.array(v) if k != "model" else v) for k, v in out.items()}


def read_percentiles(path) -> tuple[np.ndarray, np.ndarray]:
    """Percentile bands; returns (days, values with columns p5..p95)."""
    header, values = _read_csv(path)
    expected = ["day", "p5", "p25", "p50", "p75", "p95"]
    _check_exact(path, header, expected)
    order = [header.index(c) for c in expected]
    values = values[:, order]
    return values[:, 0], values[:, 1:]


def read_bench(path) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Benchmark table; returns (n, mean_time_s, accepted_steps or None)."""
    header, values = _read_csv(path)
    if header[:2] != ["n", "mean_time_s"]:
        raise SchemaError(
            f"{path}: expected columns ['n', 'mean_time_s'[, "
            f"'accepted_steps']], got {header}")
    steps = None
    if len(header) > 2:
        _check_exact(path, header, ["n", "mean_time_s", "accepted_steps"])
        steps = values[:, 2]
    return values[:, 0], values[:, 1], steps


def read_erlang_curves(path):
    """Erlang curve table ``x,density_n<k>,survival_n<k>,...``.

    Returns (x, {n: (density, survival)}).
    """
    header, values = _read_csv(path)
    if header[0] != "x":
        raise SchemaError(f"{path}: first column must be 'x', got {header[:1]}")
    ns = []
    for col in header[1:]:
        kind, _, n = col.partition("_n")
        if kind not in ("density", "survival") or not n.isdigit():
            raise SchemaError(
                f"{path}: unexpected column(s) ['{col}'] "
                f"(want density_n<k>/survival_n<k>)")
        if int(n) not in ns:
            ns.append(int(n))
    curves = {}
    for n in ns:
        try:
            d = header.index(f"density_n{n}")
            s = header.index(f"survival_n{n}")
        except ValueError as exc:
            raise SchemaError(f"{path}: missing column(s) [{exc}]") from None
        curves[n] = (values[:, d], values[:, s])
    return values[:, 0], curves


def read_speedup(path) -> tuple[np.ndarray, np.ndarray]:
    """Speedup report JSON; returns (workers, speedup) arrays."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"input file {path} does not exist")
    try:
        rows = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(rows, list) or not rows:
        raise SchemaError(f"{path}: expected a nonempty list of rows")
    for row in rows:
        for key in ("workers", "speedup"):
            if key not in row:
                raise SchemaError(f"{path}: row missing key '{key}'")
    return (np.array([r["workers"] for r in rows], dtype=float),
            np.array([r["speedup"] for r in rows], dtype=float))
