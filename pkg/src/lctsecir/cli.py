"""Command-line interface.

Each subcommand is a reproducible experiment with sensible defaults baked in,
writing CSV/JSON artifacts in the formats of the fileio module.  Exit codes:
0 success, 1 usage error, 2 data/validation error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import analysis, fileio, params
from .ensemble import EnsembleConfig, measure_speedup, run_ensemble
from .errors import ConfigError, CoverageError, DataError, DivergenceError, \
    InfeasibleDataError, LctSecirError, SingularPopulationError, StiffnessError
from .initialization import InitSettings, constant_dynamics_init, \
    extrapolate_reported, init_from_data, uniform_fill
from .model import Compartment, ContactSchedule, ModelSpec, Subcompartments, \
    aggregate, contacts_for_reff
from .solvers import AdaptiveSettings, FixedStepSettings, SolverStats, \
    Trajectory, integrate_adaptive, integrate_fixed

DEFAULT_MODELS = "ode,lct3,lct10,lct50,lctvar"


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _model_chain_counts(model: str, groups) -> Subcompartments:
    key = model.strip().lower()
    if key == "ode":
        return Subcompartments.uniform(len(groups), 1)
    if key == "lctvar":
        return Subcompartments.from_stay_times(groups)
    if key.startswith("lct"):
        return Subcompartments.uniform(len(groups), int(key[3:]))
    raise ConfigError(f"unknown model name {model!r}")


def _averaged_spec(model: str, contacts: ContactSchedule) -> ModelSpec:
    g = params.averaged_params()
    return ModelSpec((g,), _model_chain_counts(model, (g,)), contacts)


def _seed_exposed(spec: ModelSpec, group: int, count: float) -> np.ndarray:
    """Initial state with ``count`` people spread over the group's E chain."""
    totals = np.zeros((spec.m, len(Compartment)))
    for i, g in enumerate(spec.groups):
        totals[i, Compartment.S] = g.population
    totals[group, Compartment.S] -= count
    totals[group, Compartment.E] = count
    return uniform_fill(spec, totals)


def _integrate(spec, y0, settings):
    if isinstance(settings, AdaptiveSettings):
        return integrate_adaptive(spec, y0, settings)
    return integrate_fixed(spec, y0, settings)


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# Subcommands


def cmd_simulate(args) -> int:
    plan = fileio.load_config(args.config)
    y0 = fileio.resolve_initial_state(plan)
    traj = _integrate(plan.spec, y0, plan.solver)
    out = _outdir(args.out)
    fileio.write_trajectory(out / "trajectory.csv", traj, plan.spec,
                            plan.group_names)
    if args.subcompartments:
        fileio.write_trajectory(out / "trajectory_subcompartments.csv", traj,
                                plan.spec, plan.group_names,
                                subcompartments=True)
    series = analysis.daily_new_transmissions(traj, plan.spec)
    fileio.write_series(out / "new_transmissions.csv", series.days,
                        series.values)
    fileio.write_metadata(out / "metadata.json", plan.config, traj.stats)
    return 0


def cmd_changepoint(args) -> int:
    models = args.models.split(",")
    out = _outdir(args.out)
    atoms = {}
    lag_rows = []
    for model in models:
        probe = _averaged_spec(model, ContactSchedule([[1.0]]))
        c0 = contacts_for_reff(probe, 1.0)
        spec = _averaged_spec(model, ContactSchedule(
            [[c0]], [(args.change_day, args.factor)]))
        y0 = constant_dynamics_init(spec, args.sigma)
        settings = AdaptiveSettings(t_start=0.0, t_end=float(args.days),
                                    output_cadence=0.0625)
        traj = _integrate(spec, y0, settings)
        daily = analysis.daily_new_transmissions(traj, spec, model)
        fileio.write_series(out / f"new_transmissions_{model}.csv",
                            daily.days, daily.values)
        for z, name in ((Compartment.C, "carrier"), (Compartment.I, "infected")):
            totals = np.array([aggregate(spec, st)[1][z] for st in traj.states])
            fileio.write_series(out / f"{name}_{model}.csv", traj.times,
                                totals, value_label=name, day_label="day")
        flows = analysis.flow_series(traj, spec, model)
        lag = analysis.lag_time(flows, args.change_day, threshold=0.05)
        lag_rows.append((model, lag))
        atoms[model] = daily
    if "ode" in atoms:
        for model in models:
            if model == "ode":
                continue
            rel = analysis.relative_difference(atoms[model], atoms["ode"])
            fileio.write_series(out / f"rel_diff_{model}_vs_ode.csv",
                                rel.days, rel.values,
                                value_label="relative_difference")
    with open(out / "lag_report.csv", "w") as fh:
        fh.write("model,lag_days\n")
        for model, lag in lag_rows:
            fh.write(f"{model},{'' if lag is None else repr(lag)}\n")
    return 0


def _sweep_specs(reffs, models):
    for r in reffs:
        for model in models:
            probe = _averaged_spec(model, ContactSchedule([[1.0]]))
            c = contacts_for_reff(probe, r)
            yield r, model, _averaged_spec(model, ContactSchedule([[c]]))


def cmd_peaks(args) -> int:
    reffs = [float(r) for r in args.reff.split(",")]
    models = args.models.split(",")
    out = _outdir(args.out)
    rows = []
    for r, model, spec in _sweep_specs(reffs, models):
        y0 = _seed_exposed(spec, 0, args.exposed)
        settings = AdaptiveSettings(t_start=0.0, t_end=float(args.t_end))
        traj = _integrate(spec, y0, settings)
        daily = analysis.daily_new_transmissions(traj, spec, model)
        report = analysis.peak(daily)
        rows.append((r, model, report.peak_value, report.peak_day))
    with open(out / "peaks.csv", "w") as fh:
        fh.write("reff,model,peak_value,peak_day\n")
        for r, model, value, day in rows:
            fh.write(f"{repr(r)},{model},{repr(value)},{repr(day)}\n")
    return 0


def cmd_finalsize(args) -> int:
    reffs = [float(r) for r in args.reff.split(",")]
    models = args.models.split(",")
    out = _outdir(args.out)
    sizes = {}
    for r, model, spec in _sweep_specs(reffs, models):
        y0 = _seed_exposed(spec, 0, args.exposed)
        settings = AdaptiveSettings(t_start=0.0, t_end=float(args.t_end))
        traj = _integrate(spec, y0, settings)
        sizes[(r, model)] = analysis.final_size(traj, spec, float(args.t_end))
    with open(out / "finalsize.csv", "w") as fh:
        fh.write("reff,model,final_size,rel_diff_to_ode\n")
        for (r, model), size in sizes.items():
            ode = sizes.get((r, "ode"))
            rel = "" if ode is None or model == "ode" else repr((size - ode) / ode)
            fh.write(f"{repr(r)},{model},{repr(size)},{rel}\n")
    return 0


def _covid_spec(model: str, change_points=()) -> ModelSpec:
    groups = params.age_group_params()
    contacts = ContactSchedule(params.contact_baseline(), change_points)
    return ModelSpec(groups, _model_chain_counts(model, groups), contacts)


def cmd_init_from_data(args) -> int:
    t0 = float(fileio.date_to_day(args.t0)) if "-" in args.t0 else float(args.t0)
    spec = _covid_spec(args.model)
    data = fileio.load_reported(args.cases, args.icu)
    settings = InitSettings(t0=t0, detection_ratio=1.0 / args.detection_ratio)
    y0 = init_from_data(spec, data, settings)
    out = _outdir(args.out)
    totals = aggregate(spec, y0)[0]
    with open(out / "initial_state.csv", "w") as fh:
        fh.write("age_group,compartment,value\n")
        for i, name in enumerate(params.AGE_GROUP_NAMES):
            for z in Compartment:
                fh.write(f"{name},{z.name},{repr(float(totals[i, z]))}\n")
    return 0


def cmd_covid_scenario(args) -> int:
    start = fileio.date_to_day(args.start_date)
    npi_day = float(fileio.date_to_day(args.npi_day) - start)
    if npi_day <= 0:
        raise ConfigError("npi-day must fall after start-date")
    models = args.models.split(",")
    out = _outdir(args.out)
    data = fileio.load_reported(args.cases, args.icu)
    settings = InitSettings(t0=float(start),
                            detection_ratio=1.0 / args.detection_ratio)
    for model in models:
        spec = _covid_spec(model, [(npi_day, args.npi_scale)])
        if args.fit_contacts == "first3days":
            scale = _fit_contact_scale(model, npi_day, args, data, settings)
            spec = ModelSpec(spec.groups, spec.subcompartments,
                             spec.contacts.scaled(scale))
            print(f"{model}: fitted contact scale {scale:.4f}")
        y0 = init_from_data(spec, data, settings)
        solver = AdaptiveSettings(t_start=float(start),
                                  t_end=float(start + args.days))
        traj = _integrate(spec, y0, solver)
        daily = analysis.daily_new_transmissions(traj, spec, model)
        fileio.write_series(out / f"sim_new_transmissions_{model}.csv",
                            daily.days - start, daily.values)
        for z, name in ((Compartment.I, "mild_symptomatic"),
                        (Compartment.U, "icu"), (Compartment.D, "deaths")):
            totals = np.array([aggregate(spec, st)[1][z] for st in traj.states])
            fileio.write_series(out / f"sim_{name}_{model}.csv",
                                traj.times - start, totals, value_label=name)
        extrap = extrapolate_reported(data, spec, settings,
                                      (float(start), float(start + args.days)))
        days = np.asarray(extrap["days"]) - start
        for name in ("new_transmissions", "mild_symptomatic", "icu", "deaths"):
            fileio.write_series(out / f"extrapolated_{name}_{model}.csv",
                                days, extrap[name], value_label=name)
    return 0


def _fit_contact_scale(model, npi_day, args, data, settings) -> float:
    start = settings.t0

    def misfit(scale: float) -> float:
        spec = _covid_spec(model, [(npi_day, args.npi_scale)])
        spec = ModelSpec(spec.groups, spec.subcompartments,
                         spec.contacts.scaled(scale))
        y0 = init_from_data(spec, data, settings)
        solver = AdaptiveSettings(t_start=start, t_end=start + 3.0)
        traj = _integrate(spec, y0, solver)
        sim = analysis.daily_new_transmissions(traj, spec).values
        extrap = extrapolate_reported(data, spec, settings, (start, start + 3.0))
        ref = np.asarray(extrap["new_transmissions"])[:len(sim)]
        return float(np.sum((sim - ref) ** 2))

    coarse = np.linspace(0.5, 1.5, 21)
    best = min(coarse, key=misfit)
    fine = np.arange(best - 0.05, best + 0.0501, 0.005)
    return float(min(fine, key=misfit))


def cmd_ensemble(args) -> int:
    plan = fileio.load_config(args.config)
    y0 = fileio.resolve_initial_state(plan)
    cfg = EnsembleConfig(runs=args.runs, perturbation=args.perturb,
                         master_seed=args.seed, workers=args.workers)
    out = _outdir(args.out)
    start = time.perf_counter()
    bands, _ = run_ensemble(plan.spec, y0, cfg, plan.solver)
    elapsed = time.perf_counter() - start
    for name, values in bands.series.items():
        days = bands.days[:values.shape[0]]
        fileio.write_percentiles(out / f"percentiles_{name}.csv", days, values)
    with open(out / "timing.json", "w") as fh:
        json.dump({"runs": cfg.runs, "workers": cfg.workers,
                   "wall_time_s": elapsed}, fh, indent=2)
        fh.write("\n")
    if args.speedup_workers:
        counts = [int(w) for w in args.speedup_workers.split(",")]
        rows = measure_speedup(plan.spec, y0, cfg, plan.solver, counts)
        with open(out / "speedup.json", "w") as fh:
            json.dump(rows, fh, indent=2)
            fh.write("\n")
    return 0


def cmd_bench(args) -> int:
    lo, hi = (int(x) for x in args.n_range.split(":"))
    out = _outdir(args.out)
    rows = []
    for n in range(lo, hi + 1):
        spec = _averaged_spec(f"lct{n}", ContactSchedule(
            [[params.AVG_TOTAL_CONTACTS]]))
        y0 = _seed_exposed(spec, 0, 500.0)
        if args.solver == "fixed":
            settings = FixedStepSettings(t_start=0.0, t_end=float(args.days),
                                         dt=args.dt)
        else:
            settings = AdaptiveSettings(t_start=0.0, t_end=float(args.days))
        _integrate(spec, y0, settings)  # warm the JIT / caches
        times = []
        accepted = 0
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            traj = _integrate(spec, y0, settings)
            times.append(time.perf_counter() - t0)
            accepted = traj.stats.accepted
        rows.append((n, float(np.mean(times)), accepted))
    with open(out / "bench.csv", "w") as fh:
        fh.write("n,mean_time_s,accepted_steps\n")
        for n, mean_t, acc in rows:
            fh.write(f"{n},{repr(mean_t)},{acc}\n")
    return 0


def cmd_chain_check(args) -> int:
    ns = [int(n) for n in args.n.split(",")]
    worst = 0.0
    rows = []
    for n in ns:
        dev = analysis.chain_survival_check(n, args.T)
        rows.append((n, dev))
        worst = max(worst, dev)
        print(f"n={n}: max deviation {dev:.3e}")
    if args.out:
        out = _outdir(args.out)
        with open(out / "chain_check.csv", "w") as fh:
            fh.write("n,max_deviation\n")
            for n, dev in rows:
                fh.write(f"{n},{repr(dev)}\n")
    return 0 if worst <= args.threshold else 3


# ---------------------------------------------------------------------------
# Argument wiring


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lctsecir",
                     description="Age-resolved epidemic simulations with "
                                 "Erlang-distributed stay times.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one configured simulation")
    p.add_argument("--config", required=True, help="JSON configuration path")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--subcompartments", action="store_true",
                   help="also write one column per subcompartment")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("changepoint",
                       help="contact change at a fixed day, averaged model")
    p.add_argument("--factor", type=float, default=2.0,
                   help="contact scale applied at the change day (unitless)")
    p.add_argument("--models", default=DEFAULT_MODELS,
                   help="comma list: ode, lctN, lctvar")
    p.add_argument("--days", type=float, default=12.0,
                   help="simulated horizon (days)")
    p.add_argument("--change-day", type=float, default=2.0,
                   help="day the contact factor applies (days)")
    p.add_argument("--sigma", type=float,
                   default=params.DAILY_NEW_TRANSMISSIONS_OCT_2020,
                   help="initial daily new transmissions (persons/day)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_changepoint)

    p = sub.add_parser("peaks", help="epidemic peaks over a reproduction-"
                                     "number sweep")
    p.add_argument("--reff", default="2,3,4,5,6,7,8,9,10",
                   help="comma list of initial effective reproduction numbers")
    p.add_argument("--models", default=DEFAULT_MODELS)
    p.add_argument("--exposed", type=float, default=500.0,
                   help="initially exposed persons")
    p.add_argument("--t-end", type=float, default=200.0,
                   help="simulated horizon (days)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_peaks)

    p = sub.add_parser("finalsize", help="final epidemic sizes")
    p.add_argument("--reff", default="2,4,10")
    p.add_argument("--models", default=DEFAULT_MODELS)
    p.add_argument("--exposed", type=float, default=500.0)
    p.add_argument("--t-end", type=float, default=500.0,
                   help="evaluation horizon (days)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_finalsize)

    p = sub.add_parser("init-from-data",
                       help="compute the initial state from reported data")
    p.add_argument("--cases", required=True, help="cumulative cases CSV")
    p.add_argument("--icu", required=True, help="ICU occupancy CSV")
    p.add_argument("--t0", required=True,
                   help="start day (ISO date or day offset)")
    p.add_argument("--detection-ratio", type=float, default=1.0,
                   help="underdetection factor (reported = true / this)")
    p.add_argument("--model", default="lctvar")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_init_from_data)

    p = sub.add_parser("covid-scenario",
                       help="data-initialized age-resolved scenario")
    p.add_argument("--cases", required=True)
    p.add_argument("--icu", required=True)
    p.add_argument("--start-date", default="2020-10-01", help="ISO date")
    p.add_argument("--days", type=float, default=45.0,
                   help="simulated horizon (days)")
    p.add_argument("--detection-ratio", type=float, default=1.2)
    p.add_argument("--npi-day", default="2020-10-25",
                   help="ISO date the contact reduction applies")
    p.add_argument("--npi-scale", type=float, default=0.7,
                   help="contact scale from the npi day on (unitless)")
    p.add_argument("--models", default="lctvar")
    p.add_argument("--fit-contacts", choices=("off", "first3days"),
                   default="off",
                   help="optionally fit a contact scalar to the first days")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_covid_scenario)

    p = sub.add_parser("ensemble", help="perturbed-run ensemble with "
                                        "percentile bands")
    p.add_argument("--config", required=True)
    p.add_argument("--runs", type=int, default=16384)
    p.add_argument("--perturb", type=float, default=0.1,
                   help="uniform perturbation half-width (fraction)")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--speedup-workers", default="",
                   help="comma list of worker counts for a scaling report")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("bench", help="runtime vs. subcompartment count")
    p.add_argument("--n-range", default="1:100", help="inclusive range lo:hi")
    p.add_argument("--solver", choices=("fixed", "adaptive"), default="fixed")
    p.add_argument("--repeats", type=int, default=100,
                   help="timed repetitions per n")
    p.add_argument("--days", type=float, default=20.0,
                   help="simulated horizon (days)")
    p.add_argument("--dt", type=float, default=1e-2,
                   help="fixed step size (days)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("chain-check",
                       help="chain occupancy vs. analytic Erlang survival")
    p.add_argument("--n", default="1,3,10,50", help="comma list of chain lengths")
    p.add_argument("--T", type=float, default=10.0, help="mean stay time (days)")
    p.add_argument("--threshold", type=float, default=1e-6,
                   help="maximum tolerated deviation")
    p.add_argument("--out", default="", help="optional output directory")
    p.set_defaults(func=cmd_chain_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        return args.func(args)
    except (ConfigError, DataError, CoverageError, InfeasibleDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DivergenceError, StiffnessError, SingularPopulationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except LctSecirError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
