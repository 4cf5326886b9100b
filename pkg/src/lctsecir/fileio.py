"""Configuration, reported-data, and tabular output files.

All tabular data is CSV; configuration and run metadata are JSON.  Dates are
ISO-8601 on disk and integer day offsets from a fixed epoch internally, so the
numeric core never touches the calendar.  Floats are written with ``repr``
(shortest round-trip decimal), making outputs bit-stable and reloadable
without loss.
"""
from __future__ import annotations

import csv
import datetime
import hashlib
import json
from dataclasses import dataclass
from importlib import metadata as _importlib_metadata
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .initialization import InitSettings, ReportedData
from .model import AgeGroupParams, Compartment, ContactSchedule, ModelSpec, \
    Subcompartments
from .solvers import AdaptiveSettings, FixedStepSettings, Trajectory

EPOCH = datetime.date(2020, 1, 1)

_PARAM_FIELDS = (
    "transmission_risk", "isolation_carrier", "isolation_infected",
    "latent_time", "carrier_time", "infected_time", "hospital_time",
    "icu_time", "prob_carrier_to_infected", "prob_infected_to_hospital",
    "prob_hospital_to_icu", "prob_icu_to_dead",
)

_CHAIN_KEYS = ("E", "C", "I", "H", "U")


def date_to_day(iso: str) -> int:
    """ISO-8601 date string -> integer day offset from the epoch."""
    try:
        d = datetime.date.fromisoformat(iso.strip())
    except ValueError as exc:
        raise DataError(f"unparseable date {iso!r}") from exc
    return (d - EPOCH).days


def day_to_date(day: int) -> str:
    return (EPOCH + datetime.timedelta(days=int(day))).isoformat()


def _fmt(x) -> str:
    """Shortest decimal that round-trips through float()."""
    return repr(float(x))


# ---------------------------------------------------------------------------
# Configuration documents


@dataclass
class RunPlan:
    """A fully validated model plus everything needed to run it."""

    spec: ModelSpec
    group_names: tuple[str, ...]
    initial_state: dict
    solver: object  # FixedStepSettings | AdaptiveSettings
    config: dict  # resolved configuration (file references inlined)

    @property
    def config_hash(self) -> str:
        return config_hash(self.config)


def config_hash(config: dict) -> str:
    """Hash of the canonical (sorted-key, minimal-separator) JSON form."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _require(mapping: dict, key: str, path: str):
    if key not in mapping:
        raise ConfigError(f"{path}: missing required key '{key}'")
    return mapping[key]


def _reject_unknown(mapping: dict, allowed, path: str):
    extra = set(mapping) - set(allowed)
    if extra:
        raise ConfigError(f"{path}: unknown keys {sorted(extra)}")


def _load_matrix(value, base_dir: Path, path: str) -> list:
    """Inline matrix, or a path to a CSV of numbers (no header)."""
    if isinstance(value, str):
        file = base_dir / value
        if not file.exists():
            raise ConfigError(f"{path}: referenced file {file} does not exist")
        with open(file, newline="") as fh:
            return [[float(cell) for cell in row]
                    for row in csv.reader(fh) if row]
    if not isinstance(value, list):
        raise ConfigError(f"{path}: expected a matrix or a file path")
    return value


def _parse_subcompartments(value, groups, path: str) -> Subcompartments:
    m = len(groups)
    if isinstance(value, str):
        key = value.lower()
        if key == "lctvar":
            return Subcompartments.from_stay_times(groups)
        if key.startswith("lct"):
            try:
                n = int(key[3:])
            except ValueError:
                raise ConfigError(f"{path}: unrecognized keyword {value!r}")
            if n < 1:
                raise ConfigError(f"{path}: subcompartment count must be >= 1")
            return Subcompartments.uniform(m, n)
        raise ConfigError(f"{path}: unrecognized keyword {value!r}")
    if isinstance(value, dict):
        _reject_unknown(value, _CHAIN_KEYS, path)
        rows = []
        for i in range(m):
            row = []
            for key in _CHAIN_KEYS:
                entry = _require(value, key, path)
                if isinstance(entry, list):
                    if len(entry) != m:
                        raise ConfigError(
                            f"{path}.{key}: expected {m} entries, got {len(entry)}")
                    row.append(int(entry[i]))
                else:
                    row.append(int(entry))
            rows.append(tuple(row))
        return Subcompartments(tuple(rows))
    raise ConfigError(f"{path}: expected keyword string or per-compartment map")


def load_config(path) -> RunPlan:
    """Parse and fully validate a JSON configuration document."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"configuration file {path} does not exist")
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    base_dir = path.parent
    _reject_unknown(doc, ("age_groups", "parameters", "subcompartments",
                          "contacts", "initial_state", "solver", "horizon"),
                    str(path))

    ag = _require(doc, "age_groups", "age_groups")
    _reject_unknown(ag, ("names", "populations"), "age_groups")
    names = tuple(str(n) for n in _require(ag, "names", "age_groups"))
    populations = [float(p) for p in _require(ag, "populations", "age_groups")]
    if len(names) != len(populations):
        raise ConfigError("age_groups: names and populations differ in length")
    m = len(names)

    raw_params = _require(doc, "parameters", "parameters")
    if isinstance(raw_params, dict):
        raw_params = [raw_params] * m
    if len(raw_params) != m:
        raise ConfigError(f"parameters: expected {m} entries, got {len(raw_params)}")
    groups = []
    for i, entry in enumerate(raw_params):
        _reject_unknown(entry, _PARAM_FIELDS, f"parameters[{i}]")
        kwargs = {f: float(_require(entry, f, f"parameters[{i}]"))
                  for f in _PARAM_FIELDS}
        groups.append(AgeGroupParams(population=populations[i], **kwargs))
    groups = tuple(groups)

    sub = _parse_subcompartments(_require(doc, "subcompartments", str(path)),
                                 groups, "subcompartments")

    raw_contacts = _require(doc, "contacts", "contacts")
    _reject_unknown(raw_contacts, ("baseline", "change_points"), "contacts")
    baseline = _load_matrix(_require(raw_contacts, "baseline", "contacts"),
                            base_dir, "contacts.baseline")
    if len(baseline) != m or any(len(r) != m for r in baseline):
        raise ConfigError(
            f"contacts.baseline: expected a {m}x{m} matrix for {m} age groups")
    change_points = []
    for k, cp in enumerate(raw_contacts.get("change_points", [])):
        where = f"contacts.change_points[{k}]"
        _reject_unknown(cp, ("day", "scale", "matrix"), where)
        day = float(_require(cp, "day", where))
        if ("scale" in cp) == ("matrix" in cp):
            raise ConfigError(f"{where}: provide exactly one of scale/matrix")
        if "scale" in cp:
            change_points.append((day, float(cp["scale"])))
        else:
            mat = _load_matrix(cp["matrix"], base_dir, f"{where}.matrix")
            if len(mat) != m or any(len(r) != m for r in mat):
                raise ConfigError(f"{where}.matrix: expected a {m}x{m} matrix")
            change_points.append((day, np.asarray(mat, dtype=float)))

    spec = ModelSpec(groups, sub, ContactSchedule(baseline, change_points))

    horizon = _require(doc, "horizon", "horizon")
    _reject_unknown(horizon, ("t_start", "t_end", "output_cadence_days"),
                    "horizon")
    t_start = float(_require(horizon, "t_start", "horizon"))
    t_end = float(_require(horizon, "t_end", "horizon"))
    cadence = float(horizon.get("output_cadence_days", 1.0))
    if t_end <= t_start:
        raise ConfigError("horizon: t_end must exceed t_start")

    raw_solver = _require(doc, "solver", "solver")
    method = str(_require(raw_solver, "method", "solver"))
    if method == "fixed":
        _reject_unknown(raw_solver, ("method", "dt"), "solver")
        solver = FixedStepSettings(t_start=t_start, t_end=t_end,
                                   dt=float(raw_solver.get("dt", 1e-2)),
                                   output_cadence=cadence)
    elif method == "adaptive":
        _reject_unknown(raw_solver,
                        ("method", "abs_tol", "rel_tol", "dt_init"), "solver")
        solver = AdaptiveSettings(
            t_start=t_start, t_end=t_end,
            abs_tol=float(raw_solver.get("abs_tol", 1e-10)),
            rel_tol=float(raw_solver.get("rel_tol", 1e-5)),
            dt_init=float(raw_solver.get("dt_init", 1e-3)),
            output_cadence=cadence)
    else:
        raise ConfigError(f"solver.method: unknown method {method!r}")

    initial = _require(doc, "initial_state", "initial_state")
    _reject_unknown(initial, ("explicit", "constant_dynamics", "from_data"),
                    "initial_state")
    if len(initial) != 1:
        raise ConfigError("initial_state: provide exactly one of "
                          "explicit/constant_dynamics/from_data")
    kind, payload = next(iter(initial.items()))
    if kind == "explicit":
        totals = np.asarray(payload, dtype=float)
        if totals.shape != (m, len(Compartment)):
            raise ConfigError(
                f"initial_state.explicit: expected shape ({m}, "
                f"{len(Compartment)})")
    elif kind == "constant_dynamics":
        _reject_unknown(payload, ("sigma",), "initial_state.constant_dynamics")
        float(_require(payload, "sigma", "initial_state.constant_dynamics"))
    elif kind == "from_data":
        _reject_unknown(payload, ("cases", "icu", "t0", "detection_ratio"),
                        "initial_state.from_data")
        for key in ("cases", "icu"):
            file = base_dir / str(_require(payload, key,
                                           "initial_state.from_data"))
            if not file.exists():
                raise ConfigError(
                    f"initial_state.from_data.{key}: file {file} does not exist")
            payload[key] = str(file)
        _require(payload, "t0", "initial_state.from_data")

    resolved = dict(doc)
    resolved["contacts"] = {
        "baseline": np.asarray(baseline, dtype=float).tolist(),
        "change_points": [
            {"day": d, "scale": a} if np.isscalar(a)
            else {"day": d, "matrix": np.asarray(a).tolist()}
            for d, a in change_points],
    }
    resolved["subcompartments"] = {
        key: [row[k] for row in sub.counts] for k, key in enumerate(_CHAIN_KEYS)
    }
    return RunPlan(spec=spec, group_names=names,
                   initial_state={kind: payload}, solver=solver,
                   config=resolved)


def resolve_initial_state(plan: RunPlan) -> np.ndarray:
    """Materialize the configured initial state as a flat state vector."""
    from . import initialization as init

    (kind, payload), = plan.initial_state.items()
    if kind == "explicit":
        return init.uniform_fill(plan.spec, np.asarray(payload, dtype=float))
    if kind == "constant_dynamics":
        return init.constant_dynamics_init(plan.spec, float(payload["sigma"]))
    data = load_reported(payload["cases"], payload["icu"])
    settings = InitSettings(
        t0=float(payload["t0"]),
        detection_ratio=1.0 / float(payload.get("detection_ratio", 1.0)))
    return init.init_from_data(plan.spec, data, settings)


# ---------------------------------------------------------------------------
# Reported-data ingestion


def load_reported(cases_path, icu_path, group_names=None) -> ReportedData:
    """Read cumulative case/death and ICU-occupancy CSVs into ReportedData."""
    cases_path, icu_path = Path(cases_path), Path(icu_path)
    for p in (cases_path, icu_path):
        if not p.exists():
            raise DataError(f"reported-data file {p} does not exist")
    per_group: dict[str, dict[int, tuple[float, float]]] = {}
    with open(cases_path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["date", "age_group", "cumulative_confirmed",
                    "cumulative_deaths"]
        if reader.fieldnames != expected:
            raise DataError(
                f"{cases_path}: expected header {','.join(expected)}, "
                f"got {','.join(reader.fieldnames or [])}")
        for lineno, row in enumerate(reader, start=2):
            day = date_to_day(row["date"])
            group = row["age_group"]
            try:
                conf = float(row["cumulative_confirmed"])
                dead = float(row["cumulative_deaths"])
            except (TypeError, ValueError):
                raise DataError(f"{cases_path}:{lineno}: non-numeric value")
            bucket = per_group.setdefault(group, {})
            if day in bucket:
                raise DataError(
                    f"{cases_path}:{lineno}: duplicate row for "
                    f"({row['date']}, {group})")
            bucket[day] = (conf, dead)
    if not per_group:
        raise DataError(f"{cases_path}: no data rows")
    if group_names is None:
        group_names = sorted(per_group)
    missing_groups = set(group_names) - set(per_group)
    if missing_groups:
        raise DataError(f"{cases_path}: no rows for groups "
                        f"{sorted(missing_groups)}")
    all_days = sorted({d for bucket in per_group.values() for d in bucket})
    for group in group_names:
        gaps = [d for d in all_days if d not in per_group[group]]
        if gaps:
            raise DataError(
                f"{cases_path}: group {group} is missing date "
                f"{day_to_date(gaps[0])} (rectangular coverage required)")
    days = np.array(all_days, dtype=float)
    confirmed = np.array([[per_group[g][d][0] for d in all_days]
                          for g in group_names])
    deaths = np.array([[per_group[g][d][1] for d in all_days]
                       for g in group_names])
    for label, arr in (("cumulative_confirmed", confirmed),
                       ("cumulative_deaths", deaths)):
        drops = np.diff(arr, axis=1) < 0
        if drops.any():
            g, k = np.argwhere(drops)[0]
            raise DataError(
                f"{cases_path}: {label} decreases for group "
                f"{group_names[g]} on {day_to_date(all_days[k + 1])}")

    icu_days, icu_values = [], []
    with open(icu_path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["date", "icu_occupancy"]:
            raise DataError(
                f"{icu_path}: expected header date,icu_occupancy, got "
                f"{','.join(reader.fieldnames or [])}")
        for lineno, row in enumerate(reader, start=2):
            day = date_to_day(row["date"])
            if day in icu_days:
                raise DataError(f"{icu_path}:{lineno}: duplicate date")
            value = float(row["icu_occupancy"])
            if value < 0:
                raise DataError(
                    f"{icu_path}:{lineno}: negative ICU occupancy")
            icu_days.append(day)
            icu_values.append(value)
    if not icu_days:
        raise DataError(f"{icu_path}: no data rows")
    order = np.argsort(icu_days)
    return ReportedData(
        dates=days, cumulative_confirmed=confirmed, cumulative_deaths=deaths,
        icu_dates=np.asarray(icu_days, dtype=float)[order],
        icu_occupancy=np.asarray(icu_values, dtype=float)[order])


# ---------------------------------------------------------------------------
# Tabular outputs


def write_trajectory(path, traj: Trajectory, spec: ModelSpec, group_names=None,
                     subcompartments: bool = False) -> None:
    """Write aggregated (or per-subcompartment) trajectory columns."""
    from .model import aggregate

    cols = spec.layout.column_names(group_names, subcompartments)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", *cols])
        for t, state in zip(traj.times, traj.states):
            if subcompartments:
                values = state
            else:
                values = aggregate(spec, state)[0].ravel()
            writer.writerow([_fmt(t), *(_fmt(v) for v in values)])


def read_trajectory(path) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Read a trajectory CSV back: (column names, times, values)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(c) for c in row] for row in reader if row]
    if not header or header[0] != "t":
        raise DataError(f"{path}: first column must be t")
    data = np.asarray(rows, dtype=float).reshape(len(rows), len(header))
    return header[1:], data[:, 0], data[:, 1:]


def write_series(path, days, values, value_label: str = "new_transmissions",
                 day_label: str = "day") -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([day_label, value_label])
        for d, v in zip(days, values):
            writer.writerow([_fmt(d), _fmt(v)])


def read_series(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        rows = [(float(r[0]), float(r[1])) for r in reader if r]
    arr = np.asarray(rows, dtype=float).reshape(len(rows), 2)
    return arr[:, 0], arr[:, 1]


PERCENTILE_COLUMNS = ("p5", "p25", "p50", "p75", "p95")


def write_percentiles(path, days, bands) -> None:
    """``bands`` has shape (len(days), 5) ordered p5..p95."""
    bands = np.asarray(bands, dtype=float)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["day", *PERCENTILE_COLUMNS])
        for d, row in zip(days, bands):
            writer.writerow([_fmt(d), *(_fmt(v) for v in row)])


def read_percentiles(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["day", *PERCENTILE_COLUMNS]:
            raise DataError(f"{path}: unexpected percentile header")
        rows = [[float(c) for c in row] for row in reader if row]
    arr = np.asarray(rows, dtype=float).reshape(len(rows), 6)
    return arr[:, 0], arr[:, 1:]


def package_version() -> str:
    try:
        return _importlib_metadata.version("lctsecir")
    except _importlib_metadata.PackageNotFoundError:
        return "unknown"


def write_metadata(path, config: dict, stats=None, extra: dict = None) -> None:
    """Companion JSON: resolved configuration, its hash, solver statistics."""
    doc = {
        "config": config,
        "config_hash": config_hash(config),
        "software_version": package_version(),
    }
    if stats is not None:
        doc["solver_stats"] = {
            "accepted": stats.accepted,
            "rejected": stats.rejected,
            "rhs_evaluations": stats.rhs_evaluations,
        }
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
