"""Model right-hand side against an independently hand-coded single-chain
ODE system, plus layout, contacts, and reproduction-number checks."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lctsecir import params
from lctsecir.errors import ModelError, SingularPopulationError, \
    UnsupportedConfigurationError
from lctsecir.model import AgeGroupParams, Compartment, ContactSchedule, \
    ModelSpec, Subcompartments, aggregate, contacts_for_reff, \
    effective_reproduction_number, force_of_infection, remaining_stay_time, rhs


def reference_rhs(groups, phi, totals):
    """Hand-coded 8-equation system per age group (one subcompartment each).

    Written directly from the flow diagram, independent of the library's
    chain machinery, as the n=1 oracle.
    """
    m = len(groups)
    out = np.zeros((m, 8))
    living = totals.sum(axis=1) - totals[:, Compartment.D]
    pressure = np.array([
        (g.isolation_carrier * totals[k, Compartment.C]
         + g.isolation_infected * totals[k, Compartment.I]) / living[k]
        for k, g in enumerate(groups)])
    for i, g in enumerate(groups):
        S, E, C, I, H, U, R, D = totals[i]
        foi = S * g.transmission_risk * float(phi[i] @ pressure)
        e_out = E / g.latent_time
        c_out = C / g.carrier_time
        i_out = I / g.infected_time
        h_out = H / g.hospital_time
        u_out = U / g.icu_time
        out[i, Compartment.S] = -foi
        out[i, Compartment.E] = foi - e_out
        out[i, Compartment.C] = e_out - c_out
        out[i, Compartment.I] = g.prob_carrier_to_infected * c_out - i_out
        out[i, Compartment.H] = g.prob_infected_to_hospital * i_out - h_out
        out[i, Compartment.U] = g.prob_hospital_to_icu * h_out - u_out
        out[i, Compartment.R] = ((1 - g.prob_carrier_to_infected) * c_out
                                 + (1 - g.prob_infected_to_hospital) * i_out
                                 + (1 - g.prob_hospital_to_icu) * h_out
                                 + (1 - g.prob_icu_to_dead) * u_out)
        out[i, Compartment.D] = g.prob_icu_to_dead * u_out
    return out


def _spec(n=1, m=1, contacts=None, groups=None):
    if groups is None:
        if m == 1:
            groups = (params.averaged_params(),)
        else:
            groups = params.age_group_params()[:m]
    if contacts is None:
        contacts = ContactSchedule(np.full((len(groups), len(groups)), 4.0))
    return ModelSpec(tuple(groups), Subcompartments.uniform(len(groups), n),
                     contacts)


def _random_state(spec, seed=0):
    rng = np.random.default_rng(seed)
    y = rng.uniform(10.0, 1000.0, spec.layout.size)
    for i in range(spec.m):
        s_idx = spec.layout.index(i, Compartment.S)
        y[s_idx] = spec.groups[i].population / 2
    return y


@pytest.mark.parametrize("m", [1, 3, 6])
def test_single_chain_matches_reference(m):
    groups = params.age_group_params()[:m] if m > 1 else (params.averaged_params(),)
    phi = np.full((m, m), 3.0) + np.diag(np.arange(m, dtype=float))
    spec = _spec(n=1, m=m, contacts=ContactSchedule(phi),
                 groups=groups)
    y = _random_state(spec, seed=m)
    totals = aggregate(spec, y)[0]
    expected = reference_rhs(groups, phi, totals)
    got = rhs(spec, 0.0, y).reshape(m, 8)
    np.testing.assert_allclose(got, expected, rtol=1e-12)


@pytest.mark.parametrize("n,m", [(1, 1), (3, 2), (10, 1), (7, 6)])
def test_rhs_conserves_mass(n, m):
    spec = _spec(n=n, m=m)
    y = _random_state(spec, seed=n + m)
    dy = rhs(spec, 0.0, y)
    assert abs(dy.sum()) < 1e-9 * spec.total_population


def test_chain_transfer_example():
    """A lone chain link with 100 people, length 2, stay time 4 days: the
    first link loses 50/day and the second gains them."""
    g = params.averaged_params()
    g = type(g)(**{**g.__dict__, "latent_time": 4.0})
    spec = ModelSpec((g,), Subcompartments(((2, 1, 1, 1, 1),)),
                     ContactSchedule([[0.0]]))
    y = np.zeros(spec.layout.size)
    y[spec.layout.index(0, Compartment.S)] = g.population
    e1 = spec.layout.index(0, Compartment.E, 1)
    y[e1] = 100.0
    dy = rhs(spec, 0.0, y)
    assert dy[e1] == pytest.approx(-50.0)
    assert dy[e1 + 1] == pytest.approx(50.0)


def test_chain_rate_scales_with_length():
    """Splitting a stage into n links multiplies the per-link exit rate by n,
    leaving the total stage outflow at occupancy/T."""
    for n in (1, 4, 25):
        spec = _spec(n=n)
        g = spec.groups[0]
        y = np.zeros(spec.layout.size)
        y[spec.layout.index(0, Compartment.S)] = g.population
        sl = spec.layout.slice(0, Compartment.C)
        y[sl] = 30.0  # per link
        dy = rhs(spec, 0.0, y)
        outflow_to_I = dy[spec.layout.index(0, Compartment.I, 1)]
        expected = g.prob_carrier_to_infected * 30.0 * n / g.carrier_time
        assert outflow_to_I == pytest.approx(expected)


def test_force_of_infection_zero_without_infectious():
    spec = _spec(n=3, m=2)
    y = np.zeros(spec.layout.size)
    for i in range(2):
        y[spec.layout.index(i, Compartment.S)] = spec.groups[i].population
    assert rhs(spec, 0.0, y) == pytest.approx(0.0)
    phi = spec.contacts.matrix_at(0.0)
    assert force_of_infection(spec, phi, y) == pytest.approx(0.0)


def test_dead_excluded_from_mixing_population():
    """Moving people into D shrinks the mixing denominator and raises the
    per-contact infection pressure."""
    spec = _spec(n=1)
    y = _random_state(spec)
    phi = spec.contacts.matrix_at(0.0)
    base = force_of_infection(spec, phi, y)[0]
    y2 = y.copy()
    shift = spec.groups[0].population / 4
    y2[spec.layout.index(0, Compartment.R)] -= shift
    y2[spec.layout.index(0, Compartment.D)] += shift
    assert force_of_infection(spec, phi, y2)[0] > base


def test_all_dead_population_rejected():
    spec = _spec(n=1)
    y = np.zeros(spec.layout.size)
    y[spec.layout.index(0, Compartment.D)] = 1000.0
    with pytest.raises(SingularPopulationError):
        rhs(spec, 0.0, y)


def test_effective_reproduction_number_calibration():
    spec = _spec(n=1, contacts=ContactSchedule([[1.0]]))
    c = contacts_for_reff(spec, 1.0)
    assert c == pytest.approx(3.22, abs=0.01)
    # Round trip: an all-susceptible population with these contacts has R = 1.
    spec2 = _spec(n=1, contacts=ContactSchedule([[c]]))
    y = np.zeros(spec2.layout.size)
    y[spec2.layout.index(0, Compartment.S)] = spec2.groups[0].population
    assert effective_reproduction_number(spec2, 0.0, y) == pytest.approx(1.0)


def test_reff_scales_with_susceptible_share():
    spec = _spec(n=5, contacts=ContactSchedule([[6.0]]))
    y = np.zeros(spec.layout.size)
    n_pop = spec.groups[0].population
    y[spec.layout.index(0, Compartment.S)] = n_pop
    r_full = effective_reproduction_number(spec, 0.0, y)
    y[spec.layout.index(0, Compartment.S)] = 0.25 * n_pop
    y[spec.layout.index(0, Compartment.R)] = 0.75 * n_pop
    assert effective_reproduction_number(spec, 0.0, y) == pytest.approx(
        0.25 * r_full)


def test_reff_requires_single_group():
    spec = _spec(n=1, m=2)
    y = _random_state(spec)
    with pytest.raises(UnsupportedConfigurationError):
        effective_reproduction_number(spec, 0.0, y)


def test_layout_indexing_and_columns():
    sub = Subcompartments(((2, 3, 1, 1, 1), (1, 1, 1, 1, 2)))
    lay = ModelSpec(params.age_group_params()[:2], sub,
                    ContactSchedule(np.ones((2, 2)))).layout
    assert lay.size == (3 + 8) + (3 + 6)
    assert lay.index(0, Compartment.S) == 0
    assert lay.index(0, Compartment.E, 2) == 2
    assert lay.index(0, Compartment.C, 3) == 5
    assert lay.index(1, Compartment.S) == 11
    assert lay.index(1, Compartment.D) == lay.size - 1
    with pytest.raises(ModelError):
        lay.index(0, Compartment.E, 3)
    cols = lay.column_names(["a", "b"])
    assert cols[0] == "a_S" and cols[8] == "b_S" and cols[-1] == "b_D"
    sub_cols = lay.column_names(["a", "b"], subcompartments=True)
    assert "a_E_2" in sub_cols and "b_U_2" in sub_cols
    assert len(sub_cols) == lay.size


def test_contact_schedule_changepoints():
    cs = ContactSchedule([[4.0]], [(2.0, 0.5), (5.0, [[6.0]])])
    assert cs.matrix_at(0.0)[0, 0] == 4.0
    assert cs.matrix_at(2.0)[0, 0] == 2.0  # applies at the change time
    assert cs.matrix_at(4.9)[0, 0] == 2.0
    assert cs.matrix_at(5.0)[0, 0] == 6.0
    assert cs.change_times() == (2.0, 5.0)
    scaled = cs.scaled(2.0)
    assert scaled.matrix_at(3.0)[0, 0] == 4.0
    with pytest.raises(ModelError):
        ContactSchedule([[1.0]], [(3.0, 1.0), (2.0, 1.0)])
    with pytest.raises(ModelError):
        ContactSchedule([[-1.0]])


def test_remaining_stay_time():
    spec = _spec(n=4)
    t = spec.groups[0].latent_time
    assert remaining_stay_time(spec, 0, Compartment.E, 1) == pytest.approx(t)
    assert remaining_stay_time(spec, 0, Compartment.E, 4) == pytest.approx(t / 4)


def test_subcompartment_validation():
    with pytest.raises(ModelError):
        Subcompartments(((0, 1, 1, 1, 1),))
    with pytest.raises(ModelError):
        ModelSpec(params.age_group_params(), Subcompartments.uniform(6, 2),
                  ContactSchedule(np.ones((5, 5))))


def test_params_table_consistency():
    """Per-group parameters, weighted by population, match the published
    averaged values used in the non-age-resolved experiments."""
    g = params.averaged_params()
    w = np.array(params.POPULATION) / params.TOTAL_POPULATION
    assert g.transmission_risk == pytest.approx(
        float(w @ params.TRANSMISSION_RISK), rel=1e-4)
    assert g.carrier_time == pytest.approx(
        float(w @ params.CARRIER_TIME), rel=1e-4)
    assert g.icu_time == pytest.approx(float(w @ params.ICU_TIME), rel=1e-4)
    phi = params.contact_baseline()
    assert float(w @ phi.sum(axis=1)) == pytest.approx(
        params.AVG_TOTAL_CONTACTS, rel=1e-9)


@given(scale=st.floats(0.1, 10.0))
@settings(max_examples=30, deadline=None)
def test_infection_flow_linear_in_contacts(scale):
    spec = _spec(n=2)
    y = _random_state(spec, seed=1)
    phi = spec.contacts.matrix_at(0.0)
    base = force_of_infection(spec, phi, y)[0]
    assert force_of_infection(spec, phi * scale, y)[0] == pytest.approx(
        scale * base, rel=1e-12)
