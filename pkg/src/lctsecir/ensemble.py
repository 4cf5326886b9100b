"""Deterministic parallel ensemble execution with percentile aggregation.

Every run derives its perturbations from a counter-based Philox generator
keyed by (master seed, run index), so results are identical for any worker
count or scheduling.  Aggregation happens after all runs complete.
"""
from __future__ import annotations

import multiprocessing
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import EnsembleRunError, ModelError
from .model import CHAIN_COMPARTMENTS, Compartment, ModelSpec
from .solvers import AdaptiveSettings, FixedStepSettings, integrate_adaptive, \
    integrate_fixed
from .analysis import daily_new_transmissions
from .model import aggregate

PERCENTILES = (0.05, 0.25, 0.50, 0.75, 0.95)

#: Environment variable capping the worker count (useful on CI machines).
MAX_WORKERS_ENV = "LCTSECIR_MAX_WORKERS"


@dataclass(frozen=True)
class EnsembleConfig:
    runs: int = 16384
    perturbation: float = 0.10  # uniform multiplicative half-width
    master_seed: int = 0
    workers: int = 1
    # Perturbed quantities: always a subset of
    # {"initial_totals", "transmission_risk", "stay_times"}.
    perturb: tuple[str, ...] = ("initial_totals",)

    def __post_init__(self):
        if self.runs < 1:
            raise ModelError("run count must be >= 1")
        if not 0.0 <= self.perturbation < 1.0:
            raise ModelError("perturbation half-width must be in [0, 1)")
        if self.workers < 1:
            raise ModelError("worker count must be >= 1")
        unknown = set(self.perturb) - {"initial_totals", "transmission_risk",
                                       "stay_times"}
        if unknown:
            raise ModelError(f"unknown perturbation targets: {sorted(unknown)}")


@dataclass
class PercentileBands:
    """p5/p25/p50/p75/p95 per output series and day."""

    days: np.ndarray
    series: dict[str, np.ndarray]  # name -> array of shape (len(days), 5)


def percentile(sorted_sample, q: float) -> float:
    """Linear interpolation between order statistics at position q*(N-1)."""
    sample = np.asarray(sorted_sample, dtype=float)
    if sample.size == 0:
        raise ModelError("percentile of an empty sample is undefined")
    pos = q * (sample.size - 1)
    lo = int(np.floor(pos))
    hi = min(lo + 1, sample.size - 1)
    w = pos - lo
    return float((1 - w) * sample[lo] + w * sample[hi])


def _perturbed_inputs(spec, base_state, cfg, run_index):
    rng = np.random.Generator(np.random.Philox(
        key=np.array([cfg.master_seed, run_index], dtype=np.uint64)))
    w = cfg.perturbation
    lay = spec.layout
    y = np.array(base_state, dtype=float)
    if "initial_totals" in cfg.perturb:
        # Scale each infection-state total; S absorbs the difference so the
        # group population stays fixed.
        for i in range(spec.m):
            shift = 0.0
            for z in CHAIN_COMPARTMENTS:
                sl = lay.slice(i, z)
                factor = rng.uniform(1.0 - w, 1.0 + w)
                before = y[sl].sum()
                y[sl] *= factor
                shift += before * (factor - 1.0)
            s_idx = lay.index(i, Compartment.S)
            y[s_idx] -= shift
            if y[s_idx] < 0:
                raise EnsembleRunError(
                    run_index, f"perturbed infections exceed group {i} population")
    run_spec = spec
    if "transmission_risk" in cfg.perturb or "stay_times" in cfg.perturb:
        groups = []
        for g in spec.groups:
            kwargs = {}
            if "transmission_risk" in cfg.perturb:
                rho = g.transmission_risk * rng.uniform(1.0 - w, 1.0 + w)
                if rho > 1.0:
                    raise EnsembleRunError(
                        run_index, f"perturbed transmission risk {rho:.4f} > 1")
                kwargs["transmission_risk"] = rho
            if "stay_times" in cfg.perturb:
                for name in ("latent_time", "carrier_time", "infected_time",
                             "hospital_time", "icu_time"):
                    kwargs[name] = getattr(g, name) * rng.uniform(1.0 - w, 1.0 + w)
            groups.append(replace(g, **kwargs))
        run_spec = ModelSpec(tuple(groups), spec.subcompartments, spec.contacts)
    return run_spec, y


def _run_one(args):
    spec, base_state, cfg, settings, run_index = args
    run_spec, y0 = _perturbed_inputs(spec, base_state, cfg, run_index)
    if isinstance(settings, AdaptiveSettings):
        traj = integrate_adaptive(run_spec, y0, settings)
    else:
        traj = integrate_fixed(run_spec, y0, settings)
    dnt = daily_new_transmissions(traj, run_spec)
    totals = np.stack([aggregate(run_spec, st)[1] for st in traj.states])
    day_mask = np.isclose(traj.times, np.round(traj.times), atol=1e-9)
    return dnt.values, totals[day_mask], traj.times[day_mask]


_POOL_PAYLOAD = None


def _pool_init(payload):
    global _POOL_PAYLOAD
    _POOL_PAYLOAD = payload


def _pool_run(run_index):
    spec, base_state, cfg, settings = _POOL_PAYLOAD
    return _run_one((spec, base_state, cfg, settings, run_index))


def run_ensemble(spec: ModelSpec, base_state, cfg: EnsembleConfig,
                 settings) -> tuple[PercentileBands, list[dict]]:
    """Run the ensemble and aggregate percentile bands per series and day."""
    workers = cfg.workers
    cap = os.environ.get(MAX_WORKERS_ENV)
    if cap:
        workers = min(workers, max(1, int(cap)))
    indices = range(cfg.runs)
    if workers == 1:
        results = [_run_one((spec, base_state, cfg, settings, r)) for r in indices]
    else:
        ctx = multiprocessing.get_context("fork")
        payload = (spec, base_state, cfg, settings)
        chunk = max(1, cfg.runs // (workers * 8))
        with ctx.Pool(workers, initializer=_pool_init,
                      initargs=(payload,)) as pool:
            results = pool.map(_pool_run, indices, chunksize=chunk)
    dnt_stack = np.stack([r[0] for r in results])
    totals_stack = np.stack([r[1] for r in results])
    day_grid = results[0][2]
    qs = np.array(PERCENTILES)
    bands = {"new_transmissions": _bands(dnt_stack, qs)}
    for z in Compartment:
        bands[z.name] = _bands(totals_stack[:, :, z], qs)
    summaries = [
        {"run": r, "peak_new_transmissions": float(dnt_stack[r].max()),
         "total_transmissions": float(dnt_stack[r].sum())}
        for r in indices
    ]
    return PercentileBands(days=day_grid, series=bands), summaries


def _bands(stack: np.ndarray, qs) -> np.ndarray:
    # stack: (runs, days); output (days, len(qs))
    srt = np.sort(stack, axis=0)
    out = np.empty((stack.shape[1], len(qs)))
    for j, q in enumerate(qs):
        pos = q * (stack.shape[0] - 1)
        lo = int(np.floor(pos))
        hi = min(lo + 1, stack.shape[0] - 1)
        w = pos - lo
        out[:, j] = (1 - w) * srt[lo] + w * srt[hi]
    return out


def measure_speedup(spec: ModelSpec, base_state, cfg: EnsembleConfig, settings,
                    worker_counts) -> list[dict]:
    """Wall-clock time and speedup vs. one worker for each worker count."""
    rows = []
    t1 = None
    for w in worker_counts:
        run_cfg = replace(cfg, workers=int(w))
        start = time.perf_counter()
        run_ensemble(spec, base_state, run_cfg, settings)
        elapsed = time.perf_counter() - start
        if int(w) == 1 and t1 is None:
            t1 = elapsed
        rows.append({"workers": int(w), "wall_time_s": elapsed,
                     "speedup": (t1 / elapsed) if t1 else float("nan")})
    return rows
