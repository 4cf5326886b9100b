"""Exception types shared across the package."""


class LctSecirError(Exception):
    """Base class for all package errors."""


class ModelError(LctSecirError, ValueError):
    """Invalid model definition or state."""


class SingularPopulationError(ModelError):
    """Living population of some age group is not positive."""


class UnsupportedConfigurationError(ModelError):
    """Operation not defined for this model configuration."""


class DivergenceError(LctSecirError):
    """Integration produced a non-finite state."""

    def __init__(self, time):
        super().__init__(f"non-finite state encountered at t={time:.6g}")
        self.time = time


class StiffnessError(LctSecirError):
    """Adaptive step size fell below the allowed minimum."""


class CoverageError(LctSecirError):
    """Reported data does not cover a required time interval."""


class DataError(LctSecirError, ValueError):
    """Invalid or inconsistent reported data."""


class InfeasibleDataError(DataError):
    """Initialization from data produced a negative compartment."""


class ConfigError(LctSecirError, ValueError):
    """Invalid configuration document."""


class EnsembleRunError(LctSecirError):
    """A perturbed ensemble run produced an invalid parameter set."""

    def __init__(self, run_index, message):
        super().__init__(f"run {run_index}: {message}")
        self.run_index = run_index
