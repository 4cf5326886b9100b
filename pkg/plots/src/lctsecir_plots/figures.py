"""One rendering function per figure family.

Each function takes the parsed inputs plus style options and returns a
matplotlib Figure.  All styling is fixed (size, fonts via rcParams defaults)
so reruns on identical inputs produce identical images.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from . import readers  # noqa: E402

FIGSIZE = (8.0, 5.0)
DPI = 120


def _label_from_path(path) -> str:
    return Path(path).stem


def changepoint(inputs, marker_day=2.0, logy=False):
    """One daily-series line per input file, vertical change-point marker."""
    fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
    ylabel = None
    for path in inputs:
        name, days, values = readers.read_series(path)
        ylabel = ylabel or name.replace("_", " ")
        ax.plot(days, values, label=_label_from_path(path))
    if marker_day is not None:
        ax.axvline(marker_day, color="grey", linestyle="--", linewidth=1)
    ax.set_xlabel("day")
    ax.set_ylabel(ylabel)
    if logy:
        ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    return fig


def reldiff(inputs, marker_day=2.0, **_):
    """Relative-difference series around a change point."""
    fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
    for path in inputs:
        name, days, values = readers.read_series(path)
        ax.plot(days, values, label=_label_from_path(path))
    if marker_day is not None:
        ax.axvline(marker_day, color="grey", linestyle="--", linewidth=1)
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xlabel("day")
    ax.set_ylabel("relative difference")
    ax.legend()
    fig.tight_layout()
    return fig


def compartments(inputs, logy=False, **_):
    """Aggregated compartment trajectories, one line per column."""
    (path,) = inputs
    cols, t, values = readers.read_trajectory(path)
    fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
    for j, col in enumerate(cols):
        ax.plot(t, values[:, j], label=col)
    ax.set_xlabel("day")
    ax.set_ylabel("persons")
    if logy:
        ax.set_yscale("log")
    ax.legend(fontsize="small", ncols=2)
    fig.tight_layout()
    return fig


def subcompartments(inputs, compartment="E", three_d=False, **_):
    """Occupancy of one compartment's chain over time: heatmap or 3D."""
    (path,) = inputs
    cols, t, values = readers.read_trajectory(path)
    suffix = f"_{compartment}_"
    chain = [(j, c) for j, c in enumerate(cols) if suffix in c]
    if not chain:
        raise readers.SchemaError(
            f"{path}: no subcompartment columns for compartment "
            f"'{compartment}' (columns like <group>{suffix}<k>)")
    chain.sort(key=lambda jc: int(jc[1].rsplit("_", 1)[1]))
    occupancy = values[:, [j for j, _ in chain]]
    ks = np.arange(1, len(chain) + 1)
    if three_d:
        fig = plt.figure(figsize=FIGSIZE, dpi=DPI)
        ax = fig.add_subplot(projection="3d")
        tt, kk = np.meshgrid(t, ks, indexing="ij")
        ax.plot_surface(tt, kk, occupancy, cmap="viridis")
        ax.set_xlabel("day")
        ax.set_ylabel("subcompartment")
        ax.set_zlabel("persons")
    else:
        fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
        mesh = ax.pcolormesh(t, ks, occupancy.T, shading="nearest",
                             cmap="viridis")
        fig.colorbar(mesh, ax=ax, label="persons")
        ax.set_xlabel("day")
        ax.set_ylabel(f"{compartment} subcompartment")
    fig.tight_layout()
    return fig


def peaks(inputs, **_):
    """Peak value and peak day versus reproduction number, per model."""
    (path,) = inputs
    table = readers.read_peaks(path)
    models = list(dict.fromkeys(table["model"]))
    fig, (ax_v, ax_d) = plt.subplots(1, 2, figsize=FIGSIZE, dpi=DPI)
    for model in models:
        mask = np.array([m == model for m in table["model"]])
        order = np.argsort(table["reff"][mask])
        r = table["reff"][mask][order]
        ax_v.plot(r, table["peak_value"][mask][order], marker="o", label=model)
        ax_d.plot(r, table["peak_day"][mask][order], marker="o", label=model)
    ax_v.set_xlabel("reproduction number")
    ax_v.set_ylabel("peak daily new transmissions")
    ax_d.set_xlabel("reproduction number")
    ax_d.set_ylabel("peak day")
    ax_v.legend()
    fig.tight_layout()
    return fig


def erlang(inputs, **_):
    """Stay-time density and survival panels, one line per chain length."""
    (path,) = inputs
    x, curves = readers.read_erlang_curves(path)
    fig, (ax_d, ax_s) = plt.subplots(1, 2, figsize=FIGSIZE, dpi=DPI)
    for n, (density, survival) in curves.items():
        ax_d.plot(x, density, label=f"n={n}")
        ax_s.plot(x, survival, label=f"n={n}")
    ax_d.set_xlabel("stay time (days)")
    ax_d.set_ylabel("density")
    ax_s.set_xlabel("stay time (days)")
    ax_s.set_ylabel("survival")
    ax_d.legend()
    fig.tight_layout()
    return fig


def covid(inputs, **_):
    """Simulated vs extrapolated series: one panel per (sim, data) pair."""
    if len(inputs) < 2 or len(inputs) % 2:
        raise readers.InputError(
            "covid takes pairs of inputs: <simulated.csv> <extrapolated.csv> "
            f"[<sim> <extrap> ...]; got {len(inputs)} file(s)")
    pairs = [(inputs[i], inputs[i + 1]) for i in range(0, len(inputs), 2)]
    fig, axes = plt.subplots(1, len(pairs), figsize=FIGSIZE, dpi=DPI,
                             squeeze=False)
    for ax, (sim_path, data_path) in zip(axes[0], pairs):
        name, days, sim = readers.read_series(sim_path)
        data_name, data_days, data = readers.read_series(data_path)
        if data_name != name:
            raise readers.SchemaError(
                f"pair mismatch: {sim_path} holds '{name}' but {data_path} "
                f"holds '{data_name}'")
        ax.plot(days, sim, label="simulated")
        ax.plot(data_days, data, linestyle="--", label="extrapolated")
        ax.set_xlabel("day")
        ax.set_ylabel(name.replace("_", " "))
        ax.legend(fontsize="small")
    fig.tight_layout()
    return fig


def percentiles(inputs, **_):
    """Shaded p5-p95 and p25-p75 bands with the median line."""
    (path,) = inputs
    days, bands = readers.read_percentiles(path)
    p5, p25, p50, p75, p95 = bands.T
    fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
    ax.fill_between(days, p5, p95, alpha=0.25, label="p5-p95")
    ax.fill_between(days, p25, p75, alpha=0.45, label="p25-p75")
    ax.plot(days, p50, color="black", label="median")
    ax.set_xlabel("day")
    ax.set_ylabel("persons")
    ax.legend()
    fig.tight_layout()
    return fig


def scaling(inputs, **_):
    """Measured ensemble speedup vs worker count, with the ideal line."""
    (path,) = inputs
    workers, speedup = readers.read_speedup(path)
    fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
    ax.plot(workers, speedup, marker="o", label="measured")
    ax.plot(workers, workers, linestyle="--", color="grey", label="ideal")
    ax.set_xlabel("workers")
    ax.set_ylabel("speedup")
    ax.legend()
    fig.tight_layout()
    return fig


def runtime(inputs, **_):
    """Mean solve time vs chain length; accepted steps on a twin axis."""
    (path,) = inputs
    n, times, steps = readers.read_bench(path)
    fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
    ax.plot(n, times, marker=".", label="mean time")
    ax.set_xlabel("subcompartments per chain")
    ax.set_ylabel("mean time (s)")
    handles, labels = ax.get_legend_handles_labels()
    if steps is not None:
        ax2 = ax.twinx()
        (line,) = ax2.plot(n, steps, color="tab:orange", marker=".",
                           label="accepted steps")
        ax2.set_ylabel("accepted steps")
        handles.append(line)
        labels.append("accepted steps")
    ax.legend(handles, labels)
    fig.tight_layout()
    return fig


KINDS = {
    "changepoint": changepoint,
    "reldiff": reldiff,
    "compartments": compartments,
    "subcompartments": subcompartments,
    "peaks": peaks,
    "erlang": erlang,
    "covid": covid,
    "percentiles": percentiles,
    "scaling": scaling,
    "runtime": runtime,
}


def render(kind, inputs, output, **options):
    """Render one figure family to an image file and return its path."""
    if kind not in KINDS:
        raise readers.InputError(
            f"unknown figure kind '{kind}'; choose from {sorted(KINDS)}")
    fig = KINDS[kind](inputs, **options)
    try:
        fig.savefig(output)
    finally:
        plt.close(fig)
    return Path(output)
