"""The age-resolved SECIR-type model with subcompartment chains.

State layout: for each age group in order, the block
``[S, E_1..E_nE, C_1..C_nC, I_1..I_nI, H_1..H_nH, U_1..U_nU, R, D]``.
All quantities are persons; time is in days.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence, Union

import numpy as np

from . import erlang
from ._kernels import rhs_kernel
from .errors import ModelError, SingularPopulationError, UnsupportedConfigurationError


class Compartment(enum.IntEnum):
    S = 0
    E = 1
    C = 2
    I = 3
    H = 4
    U = 5
    R = 6
    D = 7


#: Compartments that may be split into subcompartment chains.
CHAIN_COMPARTMENTS = (Compartment.E, Compartment.C, Compartment.I,
                      Compartment.H, Compartment.U)


@dataclass(frozen=True)
class AgeGroupParams:
    """Epidemiological parameters of one age group.

    Stay times are in days, ``isolation_*`` are the *non-isolated* shares of
    carriers and of symptomatic individuals, ``population`` is the group size
    including deaths (constant in time).
    """

    transmission_risk: float
    isolation_carrier: float
    isolation_infected: float
    latent_time: float
    carrier_time: float
    infected_time: float
    hospital_time: float
    icu_time: float
    prob_carrier_to_infected: float
    prob_infected_to_hospital: float
    prob_hospital_to_icu: float
    prob_icu_to_dead: float
    population: float

    def __post_init__(self):
        for name in ("transmission_risk", "isolation_carrier", "isolation_infected",
                     "prob_carrier_to_infected", "prob_infected_to_hospital",
                     "prob_hospital_to_icu", "prob_icu_to_dead"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ModelError(f"{name} must be in [0, 1], got {v}")
        for name in ("latent_time", "carrier_time", "infected_time",
                     "hospital_time", "icu_time"):
            if not getattr(self, name) > 0:
                raise ModelError(f"{name} must be positive")
        if not self.population > 0:
            raise ModelError("population must be positive")

    def stay_time(self, z: Compartment) -> float:
        return {
            Compartment.E: self.latent_time,
            Compartment.C: self.carrier_time,
            Compartment.I: self.infected_time,
            Compartment.H: self.hospital_time,
            Compartment.U: self.icu_time,
        }[z]


@dataclass(frozen=True)
class Subcompartments:
    """Chain lengths: ``counts[i][z]`` for age group i and z in E,C,I,H,U order."""

    counts: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        for row in self.counts:
            if len(row) != 5:
                raise ModelError("each group needs counts for E, C, I, H, U")
            for n in row:
                if int(n) != n or n < 1:
                    raise ModelError(f"subcompartment count must be >= 1, got {n}")

    @classmethod
    def uniform(cls, m: int, n: int) -> "Subcompartments":
        return cls(tuple((n,) * 5 for _ in range(m)))

    @classmethod
    def from_stay_times(cls, groups: Sequence[AgeGroupParams]) -> "Subcompartments":
        """One chain link per day of mean stay time, rounded, at least 1."""
        rows = []
        for g in groups:
            rows.append(tuple(
                erlang.subcompartments_for_variance(t, t)  # round(t), clamped
                for t in (g.latent_time, g.carrier_time, g.infected_time,
                          g.hospital_time, g.icu_time)
            ))
        return cls(tuple(rows))

    def count(self, group: int, z: Compartment) -> int:
        return self.counts[group][CHAIN_COMPARTMENTS.index(z)]


ChangePoint = tuple[float, Union[float, np.ndarray]]


class ContactSchedule:
    """Piecewise-constant contact matrix.

    ``baseline[i, k]`` is the average number of daily contacts a person of
    group i has with group k.  Each change point either scales the current
    matrix uniformly or replaces it.  The new value applies at and after the
    change-point time.
    """

    def __init__(self, baseline, change_points: Sequence[ChangePoint] = ()):
        baseline = np.atleast_2d(np.asarray(baseline, dtype=float))
        if baseline.ndim != 2 or baseline.shape[0] != baseline.shape[1]:
            raise ModelError("contact matrix must be square")
        if (baseline < 0).any():
            raise ModelError("contact matrix entries must be nonnegative")
        times = [float(t) for t, _ in change_points]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ModelError("change-point times must be strictly increasing")
        self.baseline = baseline
        self.change_points = []
        matrix = baseline
        for t, action in change_points:
            if np.isscalar(action):
                matrix = matrix * float(action)
            else:
                matrix = np.atleast_2d(np.asarray(action, dtype=float))
                if matrix.shape != baseline.shape:
                    raise ModelError("replacement contact matrix has wrong shape")
                if (matrix < 0).any():
                    raise ModelError("contact matrix entries must be nonnegative")
            self.change_points.append((t, matrix))

    @property
    def m(self) -> int:
        return self.baseline.shape[0]

    def change_times(self) -> tuple[float, ...]:
        return tuple(t for t, _ in self.change_points)

    def matrix_at(self, t: float) -> np.ndarray:
        matrix = self.baseline
        for tc, mat in self.change_points:
            if t >= tc:
                matrix = mat
            else:
                break
        return matrix

    def scaled(self, factor: float) -> "ContactSchedule":
        """New schedule with baseline and all change points scaled uniformly."""
        out = ContactSchedule(self.baseline * factor)
        out.change_points = [(t, m * factor) for t, m in self.change_points]
        return out


class StateLayout:
    """Deterministic mapping between (group, compartment, subindex) and offsets."""

    def __init__(self, subcompartments: Subcompartments):
        self.counts = subcompartments.counts
        self.m = len(self.counts)
        self.group_base = []
        self.group_size = []
        offset = 0
        for row in self.counts:
            self.group_base.append(offset)
            size = 3 + sum(row)
            self.group_size.append(size)
            offset += size
        self.size = offset

    def index(self, group: int, z: Compartment, j: int = 1) -> int:
        """Flat offset of subcompartment j (1-based) of z in age group ``group``."""
        base = self.group_base[group]
        row = self.counts[group]
        if z == Compartment.S:
            return base
        off = base + 1
        for k, zc in enumerate(CHAIN_COMPARTMENTS):
            if z == zc:
                if not 1 <= j <= row[k]:
                    raise ModelError(f"subindex {j} out of range for {z.name}")
                return off + j - 1
            off += row[k]
        return off if z == Compartment.R else off + 1

    def slice(self, group: int, z: Compartment) -> slice:
        start = self.index(group, z)
        if z in CHAIN_COMPARTMENTS:
            return slice(start, start + self.counts[group][CHAIN_COMPARTMENTS.index(z)])
        return slice(start, start + 1)

    def column_names(self, group_names=None, subcompartments=False) -> list[str]:
        names = group_names or [f"G{i}" for i in range(self.m)]
        cols = []
        for i in range(self.m):
            for z in Compartment:
                if subcompartments and z in CHAIN_COMPARTMENTS:
                    n = self.counts[i][CHAIN_COMPARTMENTS.index(z)]
                    cols.extend(f"{names[i]}_{z.name}_{j}" for j in range(1, n + 1))
                else:
                    cols.append(f"{names[i]}_{z.name}")
        return cols


@dataclass
class ModelSpec:
    """Full model definition: age groups, chain lengths, contact schedule."""

    groups: tuple[AgeGroupParams, ...]
    subcompartments: Subcompartments
    contacts: ContactSchedule

    def __post_init__(self):
        self.groups = tuple(self.groups)
        m = len(self.groups)
        if m == 0:
            raise ModelError("at least one age group required")
        if len(self.subcompartments.counts) != m:
            raise ModelError("subcompartment config does not match group count")
        if self.contacts.m != m:
            raise ModelError(
                f"contact matrix is {self.contacts.m}x{self.contacts.m} "
                f"but the model has {m} age groups")

    @property
    def m(self) -> int:
        return len(self.groups)

    @cached_property
    def layout(self) -> StateLayout:
        return StateLayout(self.subcompartments)

    @cached_property
    def total_population(self) -> float:
        return sum(g.population for g in self.groups)

    @cached_property
    def packed(self) -> tuple:
        """Plain arrays consumed by the numba kernels."""
        m = self.m
        base = np.array(self.layout.group_base, dtype=np.int64)
        nsub = np.array(self.subcompartments.counts, dtype=np.int64)
        stay = np.array([[g.latent_time, g.carrier_time, g.infected_time,
                          g.hospital_time, g.icu_time] for g in self.groups])
        rate = nsub / stay
        mu = np.array([[g.prob_carrier_to_infected, g.prob_infected_to_hospital,
                        g.prob_hospital_to_icu, g.prob_icu_to_dead]
                       for g in self.groups])
        rho = np.array([g.transmission_risk for g in self.groups])
        xic = np.array([g.isolation_carrier for g in self.groups])
        xii = np.array([g.isolation_infected for g in self.groups])
        return base, nsub, rate, mu, rho, xic, xii


def layout(spec: ModelSpec) -> StateLayout:
    return spec.layout


def rhs(spec: ModelSpec, t: float, y: np.ndarray) -> np.ndarray:
    """Time derivative of the flattened state (persons/day)."""
    y = np.asarray(y, dtype=float)
    if y.shape != (spec.layout.size,):
        raise ModelError(f"state has length {y.shape}, expected {spec.layout.size}")
    lay = spec.layout
    for i in range(spec.m):
        block = y[lay.group_base[i]:lay.group_base[i] + lay.group_size[i]]
        if block[:-1].sum() <= 0:
            raise SingularPopulationError(
                f"living population of age group {i} is not positive")
    dy = np.empty_like(y)
    phi = np.ascontiguousarray(spec.contacts.matrix_at(t))
    rhs_kernel(y, phi, *spec.packed, dy)
    return dy


def force_of_infection(spec: ModelSpec, phi: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Instantaneous S->E flow per age group for a given contact matrix."""
    lay = spec.layout
    flows = np.empty(spec.m)
    pressure = np.empty(spec.m)
    for k in range(spec.m):
        g = spec.groups[k]
        block = y[lay.group_base[k]:lay.group_base[k] + lay.group_size[k]]
        n_live = block[:-1].sum()
        if n_live <= 0:
            raise SingularPopulationError(
                f"living population of age group {k} is not positive")
        csum = y[lay.slice(k, Compartment.C)].sum()
        isum = y[lay.slice(k, Compartment.I)].sum()
        pressure[k] = (g.isolation_carrier * csum + g.isolation_infected * isum) / n_live
    for i in range(spec.m):
        flows[i] = y[lay.index(i, Compartment.S)] * spec.groups[i].transmission_risk \
            * float(phi[i] @ pressure)
    return flows


def effective_reproduction_number(spec: ModelSpec, t: float, y: np.ndarray) -> float:
    """Next-generation-matrix reproduction number, non-age-resolved model only."""
    if spec.m != 1:
        raise UnsupportedConfigurationError(
            "the effective reproduction number is only derived for one age group")
    g = spec.groups[0]
    lay = spec.layout
    block = np.asarray(y, dtype=float)
    n_live = block[: lay.size - 1].sum()
    if n_live <= 0:
        raise SingularPopulationError("living population is not positive")
    phi = float(spec.contacts.matrix_at(t)[0, 0])
    s_frac = y[0] / n_live
    return g.transmission_risk * phi * (
        g.isolation_carrier * g.carrier_time
        + g.prob_carrier_to_infected * g.isolation_infected * g.infected_time
    ) * s_frac


def contacts_for_reff(spec: ModelSpec, target_reff: float) -> float:
    """Contact rate giving the target reproduction number under S/N = 1."""
    if spec.m != 1:
        raise UnsupportedConfigurationError(
            "contact calibration is only derived for one age group")
    g = spec.groups[0]
    denom = g.transmission_risk * (
        g.isolation_carrier * g.carrier_time
        + g.prob_carrier_to_infected * g.isolation_infected * g.infected_time)
    if denom == 0:
        raise ModelError("cannot calibrate contacts: zero transmission parameters")
    return target_reff / denom


def aggregate(spec: ModelSpec, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-(group, compartment) totals and all-ages totals, shape (m, 8) and (8,)."""
    lay = spec.layout
    per_group = np.empty((spec.m, 8))
    for i in range(spec.m):
        for z in Compartment:
            per_group[i, z] = y[lay.slice(i, z)].sum()
    return per_group, per_group.sum(axis=0)


def remaining_stay_time(spec: ModelSpec, group: int, z: Compartment, j: int) -> float:
    """Expected remaining stay time in compartment z from subcompartment j."""
    if z not in CHAIN_COMPARTMENTS:
        raise ModelError(f"{z.name} has no subcompartment chain")
    n = spec.subcompartments.count(group, z)
    if not 1 <= j <= n:
        raise ModelError(f"subindex {j} out of range 1..{n}")
    return (n - j + 1) * spec.groups[group].stay_time(z) / n
