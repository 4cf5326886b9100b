"""Age-resolved compartmental epidemic models with Erlang-distributed stay
times, built from subcompartment chains."""

from .erlang import ErlangParams, cdf, mean_variance, pdf, \
    subcompartments_for_variance, survival
from .errors import ConfigError, CoverageError, DataError, DivergenceError, \
    EnsembleRunError, InfeasibleDataError, LctSecirError, ModelError, \
    SingularPopulationError, StiffnessError, UnsupportedConfigurationError
from .model import AgeGroupParams, Compartment, ContactSchedule, ModelSpec, \
    StateLayout, Subcompartments, aggregate, contacts_for_reff, \
    effective_reproduction_number, force_of_infection, rhs
from .solvers import AdaptiveSettings, FixedStepSettings, SolverStats, \
    Trajectory, integrate_adaptive, integrate_fixed, rk_adaptive, rk_fixed
from .initialization import InitSettings, ReportedData, constant_dynamics_init, \
    extrapolate_reported, init_from_data, uniform_fill
from .analysis import DailySeries, PeakReport, chain_survival_check, \
    daily_new_transmissions, final_size, flow_series, \
    jump_ratio_at_changepoint, lag_time, peak, relative_difference
from .ensemble import EnsembleConfig, PercentileBands, measure_speedup, \
    percentile, run_ensemble

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
