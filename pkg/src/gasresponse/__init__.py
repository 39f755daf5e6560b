"""Linear and second-order density response of homogeneous quantum gases."""

__version__ = "0.1.0"

from .distributions import (
    Family,
    MomentumDistribution,
    check_smoothness_condition,
    eval_f,
    eval_f_derivative,
    gcheck,
    gcheck_weighted_norm,
)
from .errors import (
    AccuracyError,
    ConfigError,
    GasResponseError,
    IntegrationError,
    NearSingularError,
    ParameterDomainError,
    PreconditionError,
    ResolutionError,
    SingularityError,
    UnsupportedOperationError,
)
from .lindhard import (
    FrequencyMomentumPoint,
    LindhardValue,
    Route,
    m_fermi_1d,
    m_fermi_2d,
    m_fermi_d,
    m_general,
    m_oracle_time,
)
from .potentials import InteractionPotential, PotentialFamily
from .stability import (
    StabilityReport,
    check_theorem_conditions,
    epsilon_g,
    stability_margin,
    zero_temp_instability_scan,
)

__all__ = [
    "__version__",
    "Family", "MomentumDistribution", "check_smoothness_condition", "eval_f", "eval_f_derivative",
    "gcheck", "gcheck_weighted_norm",
    "AccuracyError", "ConfigError", "GasResponseError", "IntegrationError", "NearSingularError",
    "ParameterDomainError", "PreconditionError", "ResolutionError", "SingularityError",
    "UnsupportedOperationError",
    "FrequencyMomentumPoint", "LindhardValue", "Route", "m_fermi_1d", "m_fermi_2d", "m_fermi_d",
    "m_general", "m_oracle_time",
    "InteractionPotential", "PotentialFamily",
    "StabilityReport", "check_theorem_conditions", "epsilon_g", "stability_margin",
    "zero_temp_instability_scan",
]
