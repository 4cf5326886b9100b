"""Derived-metric calculations on synthetic and simulated series."""
import numpy as np
import pytest

from lctsecir import params
from lctsecir.analysis import DailySeries, chain_survival_check, \
    daily_new_transmissions, final_size, flow_series, \
    jump_ratio_at_changepoint, lag_time, peak, relative_difference
from lctsecir.errors import LctSecirError, ModelError
from lctsecir.initialization import constant_dynamics_init
from lctsecir.model import Compartment, ContactSchedule, ModelSpec, \
    Subcompartments, contacts_for_reff
from lctsecir.solvers import AdaptiveSettings, FixedStepSettings, \
    integrate_adaptive, integrate_fixed


def _calibrated_spec(n=3, factor=None, reff=1.0):
    g = params.averaged_params()
    probe = ModelSpec((g,), Subcompartments.uniform(1, 1),
                      ContactSchedule([[1.0]]))
    c = contacts_for_reff(probe, reff)
    cps = [(2.0, factor)] if factor is not None else []
    return ModelSpec((g,), Subcompartments.uniform(1, n),
                     ContactSchedule([[c]], cps))


def test_daily_series_validation():
    with pytest.raises(ModelError):
        DailySeries(np.array([0.0, 1.0]), np.array([1.0]))
    with pytest.raises(ModelError):
        DailySeries(np.array([1.0, 1.0]), np.array([1.0, 2.0]))


def test_daily_new_transmissions_matches_susceptible_drop():
    spec = _calibrated_spec(reff=2.0)
    y0 = constant_dynamics_init(spec, 1000.0)
    traj = integrate_adaptive(spec, y0, AdaptiveSettings(0.0, 10.0))
    series = daily_new_transmissions(traj, spec)
    assert len(series.days) == 10
    s_idx = spec.layout.index(0, Compartment.S)
    expected = traj.states[:-1, s_idx] - traj.states[1:, s_idx]
    np.testing.assert_allclose(series.values, expected)
    assert (series.values > 0).all()


def test_daily_new_transmissions_needs_daily_grid():
    spec = _calibrated_spec()
    y0 = constant_dynamics_init(spec, 1000.0)
    traj = integrate_fixed(spec, y0, FixedStepSettings(0.0, 5.0, dt=0.01),
                           output_times=np.array([0.0, 2.5, 5.0]))
    with pytest.raises(ModelError):
        daily_new_transmissions(traj, spec)


def test_jump_ratio_equals_contact_factor():
    spec = _calibrated_spec(factor=0.5)
    y0 = constant_dynamics_init(spec, 4050.0)
    traj = integrate_adaptive(spec, y0, AdaptiveSettings(0.0, 4.0))
    y_cp = traj.state_at(2.0)
    phi_pre = spec.contacts.baseline
    phi_post = spec.contacts.matrix_at(2.0)
    assert jump_ratio_at_changepoint(spec, y_cp, phi_pre, phi_post) == \
        pytest.approx(0.5, rel=1e-12)


def test_lag_time_on_synthetic_series():
    # Flat at 10 until t=2, then drifts linearly; 5% of 10 is crossed at 3.0.
    days = np.arange(0.0, 6.0, 0.05)
    values = np.where(days < 2.0, 10.0, 10.0 - 0.5 * (days - 2.0))
    lag = lag_time(DailySeries(days, values), 2.0, threshold=0.05)
    assert lag == pytest.approx(1.05, abs=0.051)
    # Never crossing the threshold gives the None sentinel.
    assert lag_time(DailySeries(days, np.full(len(days), 3.0)), 2.0) is None


def test_lag_time_rejects_coarse_cadence():
    days = np.arange(0.0, 10.0)
    with pytest.raises(ModelError):
        lag_time(DailySeries(days, np.ones(10)), 2.0)


def test_peak_earliest_maximum():
    series = DailySeries(np.arange(5.0), np.array([1.0, 7.0, 7.0, 2.0, 0.0]))
    report = peak(series)
    assert report.peak_value == 7.0 and report.peak_day == 1.0


def test_relative_difference():
    a = DailySeries(np.arange(3.0), np.array([2.0, 3.0, 4.0]))
    b = DailySeries(np.arange(3.0), np.array([2.0, 2.0, 0.0]))
    rel = relative_difference(a, b)
    assert rel.values[0] == 0.0
    assert rel.values[1] == pytest.approx(0.5)
    assert np.isnan(rel.values[2])
    with pytest.raises(ModelError):
        relative_difference(a, DailySeries(np.arange(1.0, 4.0), b.values))


def test_final_size_requires_horizon():
    spec = _calibrated_spec(reff=2.0)
    y0 = constant_dynamics_init(spec, 1000.0)
    traj = integrate_adaptive(spec, y0, AdaptiveSettings(0.0, 10.0))
    with pytest.raises(ModelError):
        final_size(traj, spec, horizon=500.0)
    # Final size = initial living population minus remaining susceptibles.
    s_idx = spec.layout.index(0, Compartment.S)
    y0_living = y0.sum() - y0[spec.layout.index(0, Compartment.D)]
    assert final_size(traj, spec, horizon=10.0) == pytest.approx(
        y0_living - traj.states[-1, s_idx], rel=1e-12)


def test_chain_survival_small_cases():
    assert chain_survival_check(1, 10.0, dt=1e-3) < 1e-6
    assert chain_survival_check(5, 8.0, dt=1e-3) < 1e-6
    dev, grid, occupancy, analytic = chain_survival_check(
        3, 10.0, return_curves=True)
    assert occupancy[0] == pytest.approx(1.0)
    assert analytic[0] == 1.0
    assert occupancy[-1] < 1e-2
