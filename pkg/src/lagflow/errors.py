"""Exception types shared across the solvers and the step controller."""

__all__ = [
    "LagflowError",
    "SolverError",
    "AdmissibilityError",
    "NewtonError",
    "ConfigError",
]


class LagflowError(Exception):
    """Base class for library errors."""


class SolverError(LagflowError):
    """A time step could not be completed; the controller may retry smaller."""


class AdmissibilityError(SolverError):
    """Trajectory left the admissible set (non-increasing nodes / det <= 0)."""


class NewtonError(SolverError):
    """The nonlinear solver did not converge within its iteration budget."""


class ConfigError(LagflowError):
    """Invalid experiment configuration."""
