"""Integrator correctness: exact solutions, convergence order, error control,
change-point handling, and kernel-vs-reference agreement."""
import numpy as np
import pytest

from lctsecir import params
from lctsecir.errors import DivergenceError
from lctsecir.model import Compartment, ContactSchedule, ModelSpec, \
    Subcompartments
from lctsecir.solvers import AdaptiveSettings, FixedStepSettings, \
    cash_karp_step, integrate_adaptive, integrate_fixed, rk_adaptive, rk_fixed


def decay(t, y):
    return -y


def test_fixed_step_exponential_decay():
    s = FixedStepSettings(t_start=0.0, t_end=5.0, dt=1e-3, output_cadence=1.0)
    traj = rk_fixed(decay, np.array([1.0]), s)
    exact = np.exp(-traj.times)
    np.testing.assert_allclose(traj.states[:, 0], exact, rtol=1e-12)


def test_adaptive_exponential_decay_within_tolerance():
    s = AdaptiveSettings(t_start=0.0, t_end=10.0, abs_tol=1e-12, rel_tol=1e-8)
    traj = rk_adaptive(decay, np.array([1.0]), s)
    exact = np.exp(-traj.times)
    np.testing.assert_allclose(traj.states[:, 0], exact, rtol=1e-6)
    assert traj.stats.accepted > 0


def test_fifth_order_convergence():
    """Halving the step of the embedded 5th-order method shrinks the global
    error by ~2^5 = 32 (accept 24..40 for rounding noise)."""
    errors = []
    for dt in (0.1, 0.05):
        s = FixedStepSettings(t_start=0.0, t_end=2.0, dt=dt, output_cadence=2.0)
        traj = rk_fixed(decay, np.array([1.0]), s)
        errors.append(abs(traj.states[-1, 0] - np.exp(-2.0)))
    ratio = errors[0] / errors[1]
    assert 24.0 < ratio < 40.0


def test_embedded_error_estimate_order():
    """The difference between the 5th- and 4th-order results scales as h^5."""
    f = lambda t, y: np.array([np.cos(t) * y[0]])
    errs = []
    for h in (0.2, 0.1):
        _, err = cash_karp_step(f, 0.3, np.array([2.0]), h)
        errs.append(abs(err[0]))
    assert errs[0] / errs[1] == pytest.approx(32.0, rel=0.2)


def _two_state_spec(change_points=()):
    g = params.averaged_params()
    return ModelSpec((g,), Subcompartments.uniform(1, 3),
                     ContactSchedule([[4.0]], change_points))


def _seeded_state(spec, exposed=1000.0):
    y = np.zeros(spec.layout.size)
    y[spec.layout.index(0, Compartment.S)] = spec.groups[0].population - exposed
    sl = spec.layout.slice(0, Compartment.E)
    y[sl] = exposed / (sl.stop - sl.start)
    return y


def test_model_kernel_matches_python_reference():
    """The compiled fixed-step path and the plain-Python integrator applied
    to the library rhs agree to near machine precision."""
    from lctsecir.model import rhs

    spec = _two_state_spec()
    y0 = _seeded_state(spec)
    s = FixedStepSettings(t_start=0.0, t_end=3.0, dt=0.05, output_cadence=1.0)
    fast = integrate_fixed(spec, y0, s)
    phi = spec.contacts.matrix_at(0.0)
    slow = rk_fixed(lambda t, y: rhs(spec, t, y), y0, s)
    np.testing.assert_allclose(fast.states, slow.states, rtol=1e-12)


def test_adaptive_kernel_matches_fixed_solution():
    spec = _two_state_spec()
    y0 = _seeded_state(spec)
    fixed = integrate_fixed(spec, y0, FixedStepSettings(0.0, 10.0, dt=1e-3))
    adaptive = integrate_adaptive(
        spec, y0, AdaptiveSettings(0.0, 10.0, abs_tol=1e-10, rel_tol=1e-8))
    np.testing.assert_allclose(adaptive.states, fixed.states,
                               rtol=1e-5, atol=1e-8)


@pytest.mark.parametrize("integrate,settings", [
    (integrate_fixed, FixedStepSettings(0.0, 6.0, dt=0.025)),
    (integrate_adaptive, AdaptiveSettings(0.0, 6.0)),
])
def test_steps_never_cross_changepoints(integrate, settings):
    """A contact jump at t=2.5 must land exactly on a step boundary: the
    trajectory around the jump differs from a jump-free run only after it."""
    spec_jump = _two_state_spec([(2.5, 3.0)])
    spec_flat = _two_state_spec()
    y0 = _seeded_state(spec_jump)
    grid = np.arange(0.0, 6.25, 0.25)
    a = integrate(spec_jump, y0, settings, output_times=grid)
    b = integrate(spec_flat, y0, settings, output_times=grid)
    assert 2.5 in a.times
    k = int(np.searchsorted(a.times, 2.5))
    np.testing.assert_allclose(a.states[: k + 1], b.states[: k + 1], rtol=1e-12)
    assert not np.allclose(a.states[-1], b.states[-1], rtol=1e-6)


def test_output_grid_and_interpolation():
    spec = _two_state_spec()
    y0 = _seeded_state(spec)
    s = FixedStepSettings(0.0, 4.0, dt=0.3, output_cadence=0.5)
    traj = integrate_fixed(spec, y0, s)
    np.testing.assert_allclose(traj.times, np.arange(0.0, 4.5, 0.5))
    np.testing.assert_allclose(traj.state_at(1.5), traj.states[3])
    with pytest.raises(Exception):
        traj.state_at(1.25)  # off the snapshot grid


def test_extra_output_times():
    spec = _two_state_spec()
    y0 = _seeded_state(spec)
    grid = np.array([0.0, 0.7, 1.35, 2.0])
    traj = integrate_fixed(spec, y0, FixedStepSettings(0.0, 2.0, dt=0.01),
                           output_times=grid)
    np.testing.assert_allclose(traj.times, grid)


def test_mass_conservation_long_run():
    spec = _two_state_spec([(5.0, 2.0)])
    y0 = _seeded_state(spec, exposed=1e5)
    traj = integrate_adaptive(spec, y0, AdaptiveSettings(0.0, 100.0))
    drift = np.abs(traj.states.sum(axis=1) - y0.sum()).max()
    assert drift <= 1e-8 * spec.total_population


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_detected():
    s = FixedStepSettings(0.0, 10.0, dt=0.5)
    with pytest.raises((DivergenceError, OverflowError)):
        rk_fixed(lambda t, y: y * y, np.array([10.0]), s)


def test_adaptive_rejects_and_still_converges():
    """A solution with a sharp transient forces step rejections."""
    f = lambda t, y: np.array([-50.0 * (y[0] - np.cos(t))])
    s = AdaptiveSettings(0.0, 3.0, abs_tol=1e-10, rel_tol=1e-8, dt_init=0.5)
    traj = rk_adaptive(f, np.array([0.0]), s)
    assert traj.stats.rejected > 0
    exact = (50.0 / 2501.0) * (np.sin(3.0) + 50.0 * np.cos(3.0)
                               - 50.0 * np.exp(-50.0 * 3.0))
    assert traj.states[-1, 0] == pytest.approx(exact, abs=1e-6)


def test_settings_validation():
    with pytest.raises(Exception):
        FixedStepSettings(0.0, -1.0, dt=0.1)
    with pytest.raises(Exception):
        FixedStepSettings(0.0, 1.0, dt=0.0)
    with pytest.raises(Exception):
        AdaptiveSettings(0.0, 1.0, abs_tol=-1.0)
