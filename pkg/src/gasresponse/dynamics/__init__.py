"""Space-time fields, finite-rank perturbations, the linear-response multiplier
and a truncated-lattice Hartree integrator."""

from .fields import SpaceTimeField, SpaceTimeGrid
from .lattice import (
    TRAJECTORY_CSV_HEADER,
    LatticeState,
    MomentumLattice,
    Trajectory,
    lattice_hartree_evolve,
    potential_norm_estimate,
    reversal_error,
    write_trajectory_csv,
)
from .multiplier import (
    LatticeSymbol,
    apply_L1,
    check_box,
    invert_one_plus_L1,
    lattice_symbol,
    linearized_response,
)
from .perturbation import (
    FinitePerturbation,
    GaussianOrbital,
    GridOrbital,
    StrichartzResult,
    free_density,
    schatten_norm,
    strichartz_details,
    strichartz_ratio,
)

__all__ = [
    "SpaceTimeField", "SpaceTimeGrid",
    "LatticeState", "MomentumLattice", "Trajectory", "lattice_hartree_evolve",
    "potential_norm_estimate", "reversal_error", "write_trajectory_csv", "TRAJECTORY_CSV_HEADER",
    "LatticeSymbol", "apply_L1", "check_box", "invert_one_plus_L1", "lattice_symbol",
    "linearized_response",
    "FinitePerturbation", "GaussianOrbital", "GridOrbital", "StrichartzResult",
    "free_density", "schatten_norm", "strichartz_details", "strichartz_ratio",
]
