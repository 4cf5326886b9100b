"""Initial-state construction.

Synthetic starts (uniform subcompartment filling, constant-dynamics start) and
data-driven initialization from cumulative reported case data, including the
extrapolation of reported data into daily comparison series.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CoverageError, DataError, InfeasibleDataError, ModelError, \
    UnsupportedConfigurationError
from .model import CHAIN_COMPARTMENTS, Compartment, ModelSpec


@dataclass
class ReportedData:
    """Age-resolved cumulative confirmed cases / deaths and total ICU occupancy.

    ``dates`` are integer day stamps (daily cadence).  The cumulative arrays
    have shape (m, len(dates)); the ICU series is not age-resolved.
    """

    dates: np.ndarray
    cumulative_confirmed: np.ndarray
    cumulative_deaths: np.ndarray
    icu_dates: np.ndarray
    icu_occupancy: np.ndarray

    def __post_init__(self):
        self.dates = np.asarray(self.dates, dtype=float)
        self.cumulative_confirmed = np.atleast_2d(
            np.asarray(self.cumulative_confirmed, dtype=float))
        self.cumulative_deaths = np.atleast_2d(
            np.asarray(self.cumulative_deaths, dtype=float))
        self.icu_dates = np.asarray(self.icu_dates, dtype=float)
        self.icu_occupancy = np.asarray(self.icu_occupancy, dtype=float)
        for name, arr in (("confirmed", self.cumulative_confirmed),
                          ("deaths", self.cumulative_deaths)):
            if arr.shape[1] != len(self.dates):
                raise DataError(f"cumulative {name} series does not match dates")
            drops = np.diff(arr, axis=1) < 0
            if drops.any():
                g, k = np.argwhere(drops)[0]
                raise DataError(
                    f"cumulative {name} decreases for group {g} between day "
                    f"{self.dates[k]:.0f} and {self.dates[k + 1]:.0f}")

    @property
    def m(self) -> int:
        return self.cumulative_confirmed.shape[0]


@dataclass(frozen=True)
class InitSettings:
    t0: float
    detection_ratio: float = 1.0
    icu_rescale: bool = True

    def __post_init__(self):
        if not 0.0 < self.detection_ratio <= 1.0:
            raise ModelError("detection ratio must be in (0, 1]")


def uniform_fill(spec: ModelSpec, totals) -> np.ndarray:
    """State from per-(group, compartment) totals, split equally along chains.

    ``totals`` has shape (m, 8) in S, E, C, I, H, U, R, D order.
    """
    totals = np.atleast_2d(np.asarray(totals, dtype=float))
    if totals.shape != (spec.m, 8):
        raise ModelError(f"totals must have shape ({spec.m}, 8)")
    if (totals < 0).any():
        raise ModelError("compartment totals must be nonnegative")
    lay = spec.layout
    y = np.zeros(lay.size)
    for i in range(spec.m):
        for z in Compartment:
            sl = lay.slice(i, z)
            n = sl.stop - sl.start
            y[sl] = totals[i, z] / n
    return y


def constant_dynamics_init(spec: ModelSpec, daily_new_transmissions: float) -> np.ndarray:
    """Start consistent with a constant inflow of new transmissions per day.

    Each compartment holds inflow rate x mean stay time, discounted by the
    transition probabilities along the chain; only defined without age
    resolution.
    """
    if spec.m != 1:
        raise UnsupportedConfigurationError(
            "constant-dynamics start is defined for one age group")
    if not daily_new_transmissions >= 0:
        raise ModelError("daily new transmissions must be nonnegative")
    g = spec.groups[0]
    sigma = daily_new_transmissions
    e_total = sigma * g.latent_time
    c_total = sigma * g.carrier_time
    i_total = sigma * g.prob_carrier_to_infected * g.infected_time
    h_total = i_total / g.infected_time * g.prob_infected_to_hospital * g.hospital_time
    u_total = h_total / g.hospital_time * g.prob_hospital_to_icu * g.icu_time
    infected = e_total + c_total + i_total + h_total + u_total
    s_total = g.population - infected
    if s_total < 0:
        raise InfeasibleDataError(
            "constant-dynamics start exceeds the population size")
    totals = np.array([[s_total, e_total, c_total, i_total, h_total, u_total,
                        0.0, 0.0]])
    return uniform_fill(spec, totals)


def interpolate_reported(dates, values, t: float) -> float:
    """Linear interpolation of a daily series; exact at report times."""
    dates = np.asarray(dates, dtype=float)
    values = np.asarray(values, dtype=float)
    if t < dates[0] - 1e-9 or t > dates[-1] + 1e-9:
        raise CoverageError(
            f"time {t:.3f} outside the reported range "
            f"[{dates[0]:.0f}, {dates[-1]:.0f}]")
    return float(np.interp(t, dates, values))


def _chain_from_differences(sigma, t_ref, offsets_sign, stay, n, prefactor):
    """Occupancies from differences of the scaled cumulative series.

    ``offsets_sign`` +1 evaluates at t_ref + j*stay/n (future branch used by
    E and C), -1 at t_ref - j*stay/n.
    """
    vals = np.empty(n)
    step = stay / n
    for j in range(1, n + 1):
        if offsets_sign > 0:
            hi = sigma(t_ref + (n - j + 1) * step)
            lo = sigma(t_ref + (n - j) * step)
        else:
            hi = sigma(t_ref - (j - 1) * step)
            lo = sigma(t_ref - j * step)
        vals[j - 1] = prefactor * (hi - lo)
    return vals


def init_from_data(spec: ModelSpec, data: ReportedData, s: InitSettings) -> np.ndarray:
    """State at t0 from cumulative confirmed cases, deaths and ICU occupancy."""
    if data.m != spec.m:
        raise DataError(f"reported data has {data.m} groups, model has {spec.m}")
    lay = spec.layout
    y = np.zeros(lay.size)
    t0 = s.t0
    u_slices = []
    for i in range(spec.m):
        g = spec.groups[i]
        conf = data.cumulative_confirmed[i]
        scale = 1.0 / s.detection_ratio

        def sigma(t, _conf=conf, _scale=scale):
            return _scale * interpolate_reported(data.dates, _conf, t)

        n_e, n_c, n_i, n_h, n_u = spec.subcompartments.counts[i]
        mu_ci = g.prob_carrier_to_infected
        y[lay.slice(i, Compartment.I)] = _chain_from_differences(
            sigma, t0, -1, g.infected_time, n_i, 1.0)
        y[lay.slice(i, Compartment.E)] = _chain_from_differences(
            sigma, t0 + g.carrier_time, +1, g.latent_time, n_e, 1.0 / mu_ci)
        y[lay.slice(i, Compartment.C)] = _chain_from_differences(
            sigma, t0, +1, g.carrier_time, n_c, 1.0 / mu_ci)
        y[lay.slice(i, Compartment.H)] = _chain_from_differences(
            sigma, t0 - g.infected_time, -1, g.hospital_time, n_h,
            g.prob_infected_to_hospital)
        y[lay.slice(i, Compartment.U)] = _chain_from_differences(
            sigma, t0 - g.infected_time - g.hospital_time, -1, g.icu_time, n_u,
            g.prob_hospital_to_icu * g.prob_infected_to_hospital)
        u_slices.append(lay.slice(i, Compartment.U))
    if s.icu_rescale:
        reported_icu = interpolate_reported(data.icu_dates, data.icu_occupancy, t0)
        computed_icu = sum(y[sl].sum() for sl in u_slices)
        if computed_icu <= 0:
            if reported_icu > 0:
                raise InfeasibleDataError(
                    "reported ICU occupancy is nonzero but the computed "
                    "ICU population is zero; cannot rescale")
        else:
            factor = reported_icu / computed_icu
            for sl in u_slices:
                y[sl] *= factor
    for i in range(spec.m):
        g = spec.groups[i]
        shift = g.infected_time + g.hospital_time + g.icu_time
        d0 = interpolate_reported(data.dates, data.cumulative_deaths[i], t0 - shift)
        y[lay.index(i, Compartment.D)] = d0
        confirmed_t0 = interpolate_reported(
            data.dates, data.cumulative_confirmed[i], t0) / s.detection_ratio
        in_i = y[lay.slice(i, Compartment.I)].sum()
        in_h = y[lay.slice(i, Compartment.H)].sum()
        in_u = y[lay.slice(i, Compartment.U)].sum()
        r0 = confirmed_t0 - in_i - in_h - in_u - d0
        if r0 < 0:
            raise InfeasibleDataError(
                f"negative recovered count for group {i}: the reported series "
                "are inconsistent with the stay times")
        y[lay.index(i, Compartment.R)] = r0
        block = y[lay.group_base[i]:lay.group_base[i] + lay.group_size[i]]
        s0 = g.population - block.sum()
        if s0 < 0:
            raise InfeasibleDataError(
                f"initial infections exceed the population of group {i}")
        y[lay.index(i, Compartment.S)] = s0
    return y


def extrapolate_reported(data: ReportedData, spec: ModelSpec, s: InitSettings,
                         t_range) -> dict[str, np.ndarray]:
    """Daily comparison series extrapolated from the reported data.

    Returns all-ages series over the integer days of ``t_range``:
    ``new_transmissions``, ``mild_symptomatic``, ``icu``, ``deaths``,
    keyed together with the day grid under ``days``.
    """
    days = np.arange(float(t_range[0]), float(t_range[1]) + 0.5)
    mild = np.zeros(len(days))
    deaths = np.zeros(len(days))
    new_trans = np.zeros(len(days))
    for i in range(spec.m):
        g = spec.groups[i]
        conf = data.cumulative_confirmed[i]
        scale = 1.0 / s.detection_ratio
        mu_ci = g.prob_carrier_to_infected
        lead = g.carrier_time + g.latent_time
        for k, t in enumerate(days):
            sig = lambda x: scale * interpolate_reported(data.dates, conf, x)
            mild[k] += sig(t) - sig(t - g.infected_time)
            new_trans[k] += (sig(t + lead) - sig(t + lead - 1.0)) / mu_ci
            deaths[k] += interpolate_reported(
                data.dates, data.cumulative_deaths[i],
                t - g.infected_time - g.hospital_time - g.icu_time)
    icu = np.array([interpolate_reported(data.icu_dates, data.icu_occupancy, t)
                    for t in days])
    return {"days": days, "new_transmissions": new_trans,
            "mild_symptomatic": mild, "icu": icu, "deaths": deaths}
