"""Configuration parsing, reported-data ingestion, and CSV round trips."""
import json

import numpy as np
import pytest

from lctsecir import fileio, params
from lctsecir.errors import ConfigError, DataError
from lctsecir.model import Compartment
from lctsecir.solvers import AdaptiveSettings, FixedStepSettings, SolverStats, \
    Trajectory


def base_config(**overrides):
    doc = {
        "age_groups": {"names": ["all"],
                       "populations": [params.TOTAL_POPULATION]},
        "parameters": {
            "transmission_risk": 0.07333,
            "isolation_carrier": 1.0,
            "isolation_infected": 0.3,
            "latent_time": 3.335,
            "carrier_time": 2.58916,
            "infected_time": 6.94547,
            "hospital_time": 7.28196,
            "icu_time": 13.066,
            "prob_carrier_to_infected": 0.79310,
            "prob_infected_to_hospital": 0.07864,
            "prob_hospital_to_icu": 0.17318,
            "prob_icu_to_dead": 0.21718,
        },
        "subcompartments": "lct3",
        "contacts": {"baseline": [[4.0]],
                     "change_points": [{"day": 2.0, "scale": 0.5}]},
        "initial_state": {"constant_dynamics": {"sigma": 4050.0}},
        "solver": {"method": "adaptive", "rel_tol": 1e-6},
        "horizon": {"t_start": 0.0, "t_end": 10.0, "output_cadence_days": 1.0},
    }
    doc.update(overrides)
    return doc


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def test_load_basic_config(tmp_path):
    plan = fileio.load_config(write_config(tmp_path, base_config()))
    assert plan.spec.m == 1
    assert plan.spec.subcompartments.counts == ((3, 3, 3, 3, 3),)
    assert isinstance(plan.solver, AdaptiveSettings)
    assert plan.solver.rel_tol == 1e-6
    assert plan.spec.contacts.change_times() == (2.0,)
    y0 = fileio.resolve_initial_state(plan)
    assert y0.sum() == pytest.approx(params.TOTAL_POPULATION)


def test_lct_keywords(tmp_path):
    plan = fileio.load_config(write_config(
        tmp_path, base_config(subcompartments="lct7")))
    assert plan.spec.subcompartments.counts == ((7, 7, 7, 7, 7),)
    plan = fileio.load_config(write_config(
        tmp_path, base_config(subcompartments="lctvar")))
    # Counts follow from rounding the mean stay times to integers.
    assert plan.spec.subcompartments.counts == ((3, 3, 7, 7, 13),)


def test_explicit_subcompartment_map(tmp_path):
    doc = base_config(subcompartments={"E": 2, "C": 1, "I": 4, "H": 1, "U": 1})
    plan = fileio.load_config(write_config(tmp_path, doc))
    assert plan.spec.subcompartments.counts == ((2, 1, 4, 1, 1),)


def test_unknown_keys_rejected(tmp_path):
    doc = base_config()
    doc["extra_section"] = {}
    with pytest.raises(ConfigError, match="extra_section"):
        fileio.load_config(write_config(tmp_path, doc))
    doc = base_config()
    doc["solver"]["dt"] = 0.1  # fixed-only key under adaptive
    with pytest.raises(ConfigError, match="solver"):
        fileio.load_config(write_config(tmp_path, doc))
    doc = base_config()
    doc["parameters"]["typo_field"] = 1.0
    with pytest.raises(ConfigError, match="typo_field"):
        fileio.load_config(write_config(tmp_path, doc))


def test_matrix_dimension_mismatch(tmp_path):
    doc = base_config()
    doc["contacts"]["baseline"] = [[1.0, 2.0], [3.0, 4.0]]
    with pytest.raises(ConfigError, match="baseline"):
        fileio.load_config(write_config(tmp_path, doc))


def test_missing_referenced_file(tmp_path):
    doc = base_config()
    doc["contacts"]["baseline"] = "does_not_exist.csv"
    with pytest.raises(ConfigError, match="does_not_exist"):
        fileio.load_config(write_config(tmp_path, doc))


def test_contact_matrix_from_file(tmp_path):
    (tmp_path / "phi.csv").write_text("4.5\n")
    doc = base_config()
    doc["contacts"]["baseline"] = "phi.csv"
    plan = fileio.load_config(write_config(tmp_path, doc))
    assert plan.spec.contacts.baseline[0, 0] == 4.5


def test_config_hash_key_order_invariant(tmp_path):
    doc = base_config()
    a = fileio.load_config(write_config(tmp_path, doc, "a.json"))
    shuffled = dict(reversed(list(doc.items())))
    b = fileio.load_config(write_config(tmp_path, shuffled, "b.json"))
    assert a.config_hash == b.config_hash


def test_date_conversion():
    assert fileio.date_to_day("2020-01-01") == 0
    assert fileio.date_to_day("2020-10-01") == 274
    assert fileio.day_to_date(274) == "2020-10-01"
    with pytest.raises(DataError):
        fileio.date_to_day("not-a-date")


def _write_reported(tmp_path, rows_cases, rows_icu):
    cases = tmp_path / "cases.csv"
    cases.write_text(
        "date,age_group,cumulative_confirmed,cumulative_deaths\n"
        + "".join(f"{d},{g},{c},{x}\n" for d, g, c, x in rows_cases))
    icu = tmp_path / "icu.csv"
    icu.write_text("date,icu_occupancy\n"
                   + "".join(f"{d},{v}\n" for d, v in rows_icu))
    return cases, icu


def test_load_reported_well_formed(tmp_path):
    cases, icu = _write_reported(
        tmp_path,
        [("2020-10-01", "a", 10, 1), ("2020-10-01", "b", 20, 2),
         ("2020-10-02", "a", 15, 1), ("2020-10-02", "b", 25, 2)],
        [("2020-10-01", 5.0), ("2020-10-02", 6.0)])
    data = fileio.load_reported(cases, icu)
    assert data.m == 2
    np.testing.assert_array_equal(data.dates, [274.0, 275.0])
    np.testing.assert_array_equal(data.cumulative_confirmed,
                                  [[10, 15], [20, 25]])
    np.testing.assert_array_equal(data.icu_occupancy, [5.0, 6.0])


def test_load_reported_decreasing_rejected(tmp_path):
    cases, icu = _write_reported(
        tmp_path,
        [("2020-10-01", "a", 10, 1), ("2020-10-02", "a", 9, 1)],
        [("2020-10-01", 5.0)])
    with pytest.raises(DataError, match="2020-10-02"):
        fileio.load_reported(cases, icu)


def test_load_reported_rectangularity(tmp_path):
    cases, icu = _write_reported(
        tmp_path,
        [("2020-10-01", "a", 10, 1), ("2020-10-01", "b", 20, 2),
         ("2020-10-02", "a", 15, 1)],
        [("2020-10-01", 5.0)])
    with pytest.raises(DataError, match="missing date"):
        fileio.load_reported(cases, icu)


def test_load_reported_bad_header(tmp_path):
    cases = tmp_path / "cases.csv"
    cases.write_text("date,group,confirmed,deaths\n")
    icu = tmp_path / "icu.csv"
    icu.write_text("date,icu_occupancy\n2020-10-01,3\n")
    with pytest.raises(DataError, match="header"):
        fileio.load_reported(cases, icu)


def test_trajectory_round_trip(tmp_path):
    plan = fileio.load_config(write_config(tmp_path, base_config()))
    rng = np.random.default_rng(0)
    times = np.array([0.0, 0.5, 1.0])
    states = rng.uniform(0, 1e6, (3, plan.spec.layout.size))
    traj = Trajectory(times, states, SolverStats(3, 0, 18))
    path = tmp_path / "traj.csv"
    fileio.write_trajectory(path, traj, plan.spec, plan.group_names)
    cols, t_back, values = fileio.read_trajectory(path)
    assert cols[0] == "all_S" and len(cols) == 8
    np.testing.assert_array_equal(t_back, times)
    from lctsecir.model import aggregate
    expected = np.stack([aggregate(plan.spec, y)[0].ravel() for y in states])
    np.testing.assert_array_equal(values, expected)  # exact: repr round trip
    # Per-subcompartment variant carries the full state exactly.
    fileio.write_trajectory(path, traj, plan.spec, plan.group_names,
                            subcompartments=True)
    cols, _, values = fileio.read_trajectory(path)
    assert len(cols) == plan.spec.layout.size
    np.testing.assert_array_equal(values, states)


def test_series_round_trip_and_empty(tmp_path):
    path = tmp_path / "series.csv"
    days = np.array([0.0, 1.0, 2.0])
    values = np.array([0.1, np.pi, 1e-17])
    fileio.write_series(path, days, values)
    d, v = fileio.read_series(path)
    np.testing.assert_array_equal(d, days)
    np.testing.assert_array_equal(v, values)
    fileio.write_series(path, [], [])
    assert path.read_text() == "day,new_transmissions\n"
    d, v = fileio.read_series(path)
    assert len(d) == 0


def test_percentiles_round_trip(tmp_path):
    path = tmp_path / "bands.csv"
    days = np.arange(4.0)
    bands = np.sort(np.random.default_rng(1).uniform(0, 10, (4, 5)), axis=1)
    fileio.write_percentiles(path, days, bands)
    header = path.read_text().splitlines()[0]
    assert header == "day,p5,p25,p50,p75,p95"
    d, b = fileio.read_percentiles(path)
    np.testing.assert_array_equal(b, bands)


def test_write_is_bit_stable(tmp_path):
    days = np.linspace(0, 7, 8)
    values = np.random.default_rng(2).uniform(size=8)
    fileio.write_series(tmp_path / "a.csv", days, values)
    fileio.write_series(tmp_path / "b.csv", days, values)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_metadata_contents(tmp_path):
    doc = base_config()
    plan = fileio.load_config(write_config(tmp_path, doc))
    path = tmp_path / "meta.json"
    fileio.write_metadata(path, plan.config, SolverStats(10, 2, 72))
    meta = json.loads(path.read_text())
    assert meta["config_hash"] == plan.config_hash
    assert meta["solver_stats"]["accepted"] == 10
    assert meta["config"]["horizon"]["t_end"] == 10.0
