"""Exception hierarchy shared by all modules.

The CLI maps each category to an exit status (see ``gasresponse.cli``).
"""


class GasResponseError(Exception):
    """Base class for every error raised by the package."""


class ParameterDomainError(GasResponseError, ValueError):
    """Parameters violate a type invariant (e.g. Bose gas with mu >= 0)."""


class UnsupportedOperationError(GasResponseError):
    """Operation undefined for this input (e.g. f' of a step function)."""


class AccuracyError(GasResponseError):
    """A quadrature or extrapolation failed to reach its tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class SingularityError(GasResponseError):
    """Evaluation point lies on (or numerically next to) a singular set."""


class NearSingularError(GasResponseError):
    """Multiplier 1 + w m_f is too close to zero to be inverted."""

    def __init__(self, message, margin=None, argmin=None):
        super().__init__(message)
        self.margin = margin
        self.argmin = argmin


class ResolutionError(GasResponseError):
    """Grid too coarse, aliasing, or box too small for the requested run."""


class IntegrationError(GasResponseError):
    """Time stepping drifted beyond its conservation tolerance."""


class PreconditionError(GasResponseError):
    """A documented precondition of the operation does not hold."""


class ConfigError(GasResponseError):
    """Configuration file or grid spec could not be parsed or validated."""
