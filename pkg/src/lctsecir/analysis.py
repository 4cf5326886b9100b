"""Derived metrics: daily new transmissions, change-point lag, peaks,
final size, relative deviations, and the chain-vs-Erlang oracle check."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import erlang
from .errors import LctSecirError, ModelError
from .model import CHAIN_COMPARTMENTS, Compartment, ContactSchedule, ModelSpec, \
    Subcompartments, aggregate, force_of_infection
from .solvers import FixedStepSettings, Trajectory, integrate_fixed


@dataclass
class DailySeries:
    days: np.ndarray
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.days = np.asarray(self.days, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if len(self.days) != len(self.values):
            raise ModelError("days and values must have equal length")
        if (np.diff(self.days) <= 0).any():
            raise ModelError("days must be strictly increasing")


@dataclass
class PeakReport:
    peak_value: float
    peak_day: float
    label: str = ""


def _susceptible_total(spec: ModelSpec, states: np.ndarray) -> np.ndarray:
    lay = spec.layout
    idx = [lay.index(i, Compartment.S) for i in range(spec.m)]
    return states[:, idx].sum(axis=1)


def daily_new_transmissions(traj: Trajectory, spec: ModelSpec,
                            label: str = "") -> DailySeries:
    """People moving S -> E per day: S(k) - S(k+1) on the daily grid.

    Valid because S has no inflow.  Requires the trajectory to contain
    snapshots on (at least) a daily grid.
    """
    t0 = traj.times[0]
    days = np.arange(np.ceil(t0 - 1e-9) + 0.0, traj.times[-1] - 1 + 1e-9)
    on_grid = np.concatenate((days, [days[-1] + 1]))
    idx = np.searchsorted(traj.times, on_grid)
    if (np.abs(traj.times[idx] - on_grid) > 1e-9).any():
        raise ModelError("trajectory lacks daily snapshots")
    s_tot = _susceptible_total(spec, traj.states[idx])
    return DailySeries(days, s_tot[:-1] - s_tot[1:], label)


def flow_series(traj: Trajectory, spec: ModelSpec, label: str = "") -> DailySeries:
    """Instantaneous S->E flow per snapshot interval, at the trajectory cadence.

    The flow on [t_k, t_{k+1}) is (S(t_k) - S(t_{k+1})) / (t_{k+1} - t_k),
    attributed to the interval start; used for fine-grained lag measurement.
    """
    s_tot = _susceptible_total(spec, traj.states)
    dt = np.diff(traj.times)
    return DailySeries(traj.times[:-1], (s_tot[:-1] - s_tot[1:]) / dt, label)


def jump_ratio_at_changepoint(spec: ModelSpec, y_cp: np.ndarray,
                              phi_pre, phi_post) -> float:
    """Ratio of the instantaneous S->E flow just after vs. just before the jump."""
    pre = float(force_of_infection(spec, np.atleast_2d(phi_pre), y_cp).sum())
    post = float(force_of_infection(spec, np.atleast_2d(phi_post), y_cp).sum())
    if pre == 0.0:
        raise LctSecirError("pre-change S->E flow is zero; jump ratio undefined")
    return post / pre


def lag_time(series: DailySeries, t_cp: float, threshold: float = 0.05) -> float | None:
    """Delay after t_cp until the series deviates by more than ``threshold``
    (relative) from its value immediately after the jump.

    Requires a sampling cadence of at most 0.1 days around the change point.
    Returns None when the threshold is never crossed within the series.
    """
    after = series.days >= t_cp - 1e-9
    if not after.any():
        raise ModelError("series does not cover the change point")
    days = series.days[after]
    if len(days) > 1 and np.min(np.diff(days[:10])) > 0.1 + 1e-9:
        raise ModelError("lag measurement needs a cadence of <= 0.1 days")
    values = series.values[after]
    v0 = values[0]
    if v0 == 0:
        raise LctSecirError("value after the jump is zero; lag undefined")
    crossed = np.abs(values - v0) / abs(v0) > threshold
    crossed[0] = False
    if not crossed.any():
        return None
    return float(days[np.argmax(crossed)] - t_cp)


def peak(series: DailySeries, label: str = "") -> PeakReport:
    """Maximum value and earliest time attaining it."""
    if len(series.values) == 0:
        raise ModelError("cannot take the peak of an empty series")
    k = int(np.argmax(series.values))
    return PeakReport(float(series.values[k]), float(series.days[k]),
                      label or series.label)


def final_size(traj: Trajectory, spec: ModelSpec, horizon: float = 500.0) -> float:
    """Total infections N(0) - S_total(horizon)."""
    if traj.times[-1] < horizon - 1e-9:
        raise ModelError(
            f"trajectory ends at t={traj.times[-1]:.1f}, before t={horizon:.0f}")
    lay = spec.layout
    y0 = traj.states[0]
    n0 = sum(
        y0[lay.group_base[i]:lay.group_base[i] + lay.group_size[i]][:-1].sum()
        for i in range(spec.m))
    s_end = _susceptible_total(spec, traj.state_at(horizon)[None, :])[0]
    return n0 - s_end


def relative_difference(a: DailySeries, b: DailySeries) -> DailySeries:
    """Pointwise (a - b) / b on the common day grid; NaN marks b == 0."""
    if len(a.days) != len(b.days) or (np.abs(a.days - b.days) > 1e-9).any():
        raise ModelError("series must share the same day grid")
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(b.values != 0, (a.values - b.values) / b.values, np.nan)
    return DailySeries(a.days, rel, f"({a.label}-{b.label})/{b.label}")


def chain_survival_check(n: int, stay_time: float, grid=None, dt: float = 1e-3,
                         return_curves: bool = False):
    """Max deviation between chain occupancy and the analytic Erlang survival.

    Puts unit mass in the first link of an n-chain with rate n/T (no inflow),
    integrates, and compares total occupancy with the survival function.
    """
    if grid is None:
        grid = np.linspace(0.0, 60.0, 121)
    grid = np.asarray(grid, dtype=float)
    # An isolated chain is the latent-period chain of a model with S = 0.
    from dataclasses import replace

    from .params import averaged_params  # late import to avoid a cycle
    g = replace(averaged_params(), latent_time=float(stay_time))
    spec = ModelSpec(
        groups=(g,),
        subcompartments=Subcompartments(((int(n), 1, 1, 1, 1),)),
        contacts=ContactSchedule([[0.0]]),
    )
    y0 = np.zeros(spec.layout.size)
    y0[spec.layout.index(0, Compartment.E, 1)] = 1.0
    settings = FixedStepSettings(t_start=float(grid[0]), t_end=float(grid[-1]), dt=dt)
    traj = integrate_fixed(spec, y0, settings, output_times=grid)
    sl = spec.layout.slice(0, Compartment.E)
    occupancy = traj.states[:, sl].sum(axis=1)
    p = erlang.ErlangParams(rate=n / stay_time, shape=int(n))
    analytic = np.array([erlang.survival(p, t - grid[0]) for t in grid])
    deviation = float(np.max(np.abs(occupancy - analytic)))
    if return_curves:
        return deviation, grid, occupancy, analytic
    return deviation
