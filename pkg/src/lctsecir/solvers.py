"""Time integration: fixed-step RK5 and adaptive Cash-Karp 5(4).

Both modes share the Cash-Karp tableau.  ``integrate_fixed`` and
``integrate_adaptive`` run the compiled kernels on a ``ModelSpec``;
``rk_fixed`` and ``rk_adaptive`` are plain-Python integrators for arbitrary
right-hand sides (test problems, cross-checks).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DivergenceError, ModelError, StiffnessError
from .model import ModelSpec

_TABLEAU_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (3 / 10, -9 / 10, 6 / 5),
    (-11 / 54, 5 / 2, -70 / 27, 35 / 27),
    (1631 / 55296, 175 / 512, 575 / 13824, 44275 / 110592, 253 / 4096),
)
_B5 = np.array([37 / 378, 0.0, 250 / 621, 125 / 594, 0.0, 512 / 1771])
_B4 = np.array([2825 / 27648, 0.0, 18575 / 48384, 13525 / 55296, 277 / 14336, 1 / 4])


@dataclass(frozen=True)
class FixedStepSettings:
    t_start: float
    t_end: float
    dt: float = 1e-2
    output_cadence: float = 1.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ModelError("dt must be positive")
        if not self.t_end > self.t_start:
            raise ModelError("t_end must exceed t_start")


@dataclass(frozen=True)
class AdaptiveSettings:
    t_start: float
    t_end: float
    abs_tol: float = 1e-10
    rel_tol: float = 1e-5
    dt_init: float = 1e-3
    dt_min: float = 1e-10
    dt_max: float | None = None  # defaults to the full horizon
    output_cadence: float = 1.0

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ModelError("tolerances must be positive")
        if not self.t_end > self.t_start:
            raise ModelError("t_end must exceed t_start")
        dt_max = self.dt_max if self.dt_max is not None else self.t_end - self.t_start
        if not self.dt_min <= self.dt_init <= dt_max:
            raise ModelError("require dt_min <= dt_init <= dt_max")

    @property
    def dt_max_value(self) -> float:
        return self.dt_max if self.dt_max is not None else self.t_end - self.t_start


@dataclass
class SolverStats:
    accepted: int = 0
    rejected: int = 0
    rhs_evaluations: int = 0


@dataclass
class Trajectory:
    """Sampled solution: times strictly increasing, one state row per time."""

    times: np.ndarray
    states: np.ndarray
    stats: SolverStats = field(default_factory=SolverStats)

    def state_at(self, t: float) -> np.ndarray:
        idx = np.searchsorted(self.times, t)
        if idx >= len(self.times) or abs(self.times[idx] - t) > 1e-9:
            raise ModelError(f"no snapshot at t={t}")
        return self.states[idx]


def _output_times(t_start, t_end, cadence, change_times, extra=None):
    times = [t_start, t_end]
    times.extend(np.arange(t_start, t_end, cadence)[1:])
    times.extend(t for t in change_times if t_start < t < t_end)
    if extra is not None:
        times.extend(t for t in extra if t_start <= t <= t_end)
    times = np.array(sorted(times))
    keep = np.concatenate(([True], np.diff(times) > 1e-9))
    return times[keep]


def _segments(t_start, t_end, change_times):
    bounds = [t_start]
    bounds.extend(t for t in change_times if t_start < t < t_end)
    bounds.append(t_end)
    return list(zip(bounds[:-1], bounds[1:]))


def _clamp_small_negatives(states, total_population):
    tol = 1e-9 * total_population
    tiny = (states < 0) & (states >= -tol)
    states[tiny] = 0.0
    return states


def integrate_fixed(spec: ModelSpec, y0, s: FixedStepSettings,
                    output_times=None) -> Trajectory:
    """Fixed-step 5th-order solution; lands exactly on t_end and change points."""
    y = np.array(y0, dtype=float)
    if y.shape != (spec.layout.size,):
        raise ModelError("initial state does not match the model layout")
    if (y < 0).any():
        raise ModelError("initial state must be nonnegative")
    change_times = spec.contacts.change_times()
    if output_times is None:
        out = _output_times(s.t_start, s.t_end, s.output_cadence, change_times)
    else:
        out = np.asarray(output_times, dtype=float)
    out_states = np.empty((len(out), len(y)))
    if abs(out[0] - s.t_start) <= 1e-9:
        out_states[0] = y
        inner, inner_states = out[1:], out_states[1:]
    else:
        inner, inner_states = out, out_states
    stats = SolverStats()
    for a, b in _segments(s.t_start, s.t_end, change_times):
        lo = np.searchsorted(inner, a + 1e-12)
        hi = np.searchsorted(inner, b + 1e-12)
        phi = np.ascontiguousarray(spec.contacts.matrix_at(a))
        steps, status, t_fail = _kernels.solve_fixed_segment(
            y, a, b, s.dt, phi, *spec.packed, inner[lo:hi], inner_states[lo:hi])
        stats.accepted += steps
        stats.rhs_evaluations += 6 * steps
        if status == 1:
            raise DivergenceError(t_fail)
    _clamp_small_negatives(out_states, spec.total_population)
    return Trajectory(out, out_states, stats)


def integrate_adaptive(spec: ModelSpec, y0, s: AdaptiveSettings,
                       output_times=None) -> Trajectory:
    """Adaptive Cash-Karp 5(4); steps are truncated at change points."""
    y = np.array(y0, dtype=float)
    if y.shape != (spec.layout.size,):
        raise ModelError("initial state does not match the model layout")
    if (y < 0).any():
        raise ModelError("initial state must be nonnegative")
    change_times = spec.contacts.change_times()
    if output_times is None:
        out = _output_times(s.t_start, s.t_end, s.output_cadence, change_times)
    else:
        out = np.asarray(output_times, dtype=float)
    out_states = np.empty((len(out), len(y)))
    if abs(out[0] - s.t_start) <= 1e-9:
        out_states[0] = y
        inner, inner_states = out[1:], out_states[1:]
    else:
        inner, inner_states = out, out_states
    stats = SolverStats()
    h = s.dt_init
    for a, b in _segments(s.t_start, s.t_end, change_times):
        lo = np.searchsorted(inner, a + 1e-12)
        hi = np.searchsorted(inner, b + 1e-12)
        phi = np.ascontiguousarray(spec.contacts.matrix_at(a))
        acc, rej, status, h, t_fail = _kernels.solve_adaptive_segment(
            y, a, b, h, s.dt_min, s.dt_max_value, s.abs_tol, s.rel_tol,
            phi, *spec.packed, inner[lo:hi], inner_states[lo:hi])
        stats.accepted += acc
        stats.rejected += rej
        stats.rhs_evaluations += 6 * (acc + rej)
        if status == 2:
            raise StiffnessError(
                f"step size fell below dt_min={s.dt_min} at t={t_fail:.6g}")
    _clamp_small_negatives(out_states, spec.total_population)
    return Trajectory(out, out_states, stats)


def _ck_stages(f, t, y, h):
    k = [np.asarray(f(t, y), dtype=float)]
    offsets = (0.2, 0.3, 0.6, 1.0, 0.875)
    for row, c in zip(_TABLEAU_A[1:], offsets):
        ytmp = y + h * sum(a * ki for a, ki in zip(row, k))
        k.append(np.asarray(f(t + c * h, ytmp), dtype=float))
    return k


def cash_karp_step(f, t, y, h):
    """One Cash-Karp step for a generic rhs; returns (y5, error_estimate)."""
    k = _ck_stages(f, t, y, h)
    y5 = y + h * sum(b * ki for b, ki in zip(_B5, k))
    err = h * sum((b5 - b4) * ki for b5, b4, ki in zip(_B5, _B4, k))
    return y5, err


def rk_fixed(f, y0, s: FixedStepSettings, output_times=None) -> Trajectory:
    """Plain-Python fixed-step integrator for an arbitrary rhs f(t, y)."""
    y = np.atleast_1d(np.array(y0, dtype=float))
    out = (_output_times(s.t_start, s.t_end, s.output_cadence, ())
           if output_times is None else np.asarray(output_times, dtype=float))
    snapshots = []
    stats = SolverStats()
    t = s.t_start
    oi = 0
    eps = 1e-12 * max(1.0, abs(s.t_end))
    if oi < len(out) and out[oi] <= t + eps:
        snapshots.append(y.copy())
        oi += 1
    while t < s.t_end - eps:
        h = min(s.dt, s.t_end - t)
        ynew, _ = cash_karp_step(f, t, y, h)
        if not np.isfinite(ynew).all():
            raise DivergenceError(t + h)
        tn = t + h
        while oi < len(out) and out[oi] <= tn + eps:
            w = (out[oi] - t) / h
            snapshots.append((1 - w) * y + w * ynew)
            oi += 1
        y = ynew
        t = tn
        stats.accepted += 1
        stats.rhs_evaluations += 6
    return Trajectory(out, np.array(snapshots), stats)


def rk_adaptive(f, y0, s: AdaptiveSettings, output_times=None) -> Trajectory:
    """Plain-Python adaptive Cash-Karp 5(4) for an arbitrary rhs f(t, y)."""
    y = np.atleast_1d(np.array(y0, dtype=float))
    out = (_output_times(s.t_start, s.t_end, s.output_cadence, ())
           if output_times is None else np.asarray(output_times, dtype=float))
    snapshots = []
    stats = SolverStats()
    t = s.t_start
    h = s.dt_init
    oi = 0
    eps = 1e-12 * max(1.0, abs(s.t_end))
    if oi < len(out) and out[oi] <= t + eps:
        snapshots.append(y.copy())
        oi += 1
    while t < s.t_end - eps:
        h_use = min(h, s.t_end - t)
        # Land exactly on the next output time instead of interpolating.
        if oi < len(out) and t + h_use > out[oi] + eps:
            h_use = out[oi] - t
        ynew, err_vec = cash_karp_step(f, t, y, h_use)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = s.abs_tol + s.rel_tol * np.abs(y)
            err = float(np.max(np.abs(err_vec) / scale))
        if np.isfinite(err) and err <= 1.0:
            tn = t + h_use
            while oi < len(out) and out[oi] <= tn + eps:
                w = (out[oi] - t) / h_use
                snapshots.append((1 - w) * y + w * ynew)
                oi += 1
            y = ynew
            t = tn
            stats.accepted += 1
        else:
            stats.rejected += 1
        stats.rhs_evaluations += 6
        if not np.isfinite(err):
            factor = _kernels.FAC_MIN
        elif err == 0.0:
            factor = _kernels.FAC_MAX
        else:
            factor = min(max(_kernels.SAFETY * err ** -0.2, _kernels.FAC_MIN),
                         _kernels.FAC_MAX)
        h = min(h_use * factor, s.dt_max_value)
        if h < s.dt_min:
            raise StiffnessError(f"step size fell below dt_min={s.dt_min} at t={t:.6g}")
    return Trajectory(out, np.array(snapshots), stats)
