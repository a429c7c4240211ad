"""Direct data-driven inverse optimal control for LTI systems.

Recovers the LQ weights ``(Q, R)`` (up to a positive scale) from one
optimal input/output trajectory and a block of offline Hankel data,
without identifying a state-space model.
"""
from .estimate import InconsistentDataError, UnidentifiableError, WeightEstimate
from .experiments import estimation_error
from .forward import LqObjective, data_enabled_lq, lq_oracle
from .lti import HankelBlocks, LtiSystem, Trajectory, build_hankel_blocks, double_integrator, simulate
from .simplified import (
    assemble_phi_tilde,
    check_identifiability_simplified,
    compute_condensed_predictor,
    solve_noiseless_simplified,
    solve_noisy_simplified,
)
from .vanilla import (
    assemble_psi_tilde,
    check_identifiability_vanilla,
    solve_noiseless_vanilla,
    solve_noisy_vanilla,
)

__all__ = [
    "HankelBlocks", "InconsistentDataError", "LqObjective", "LtiSystem", "Trajectory",
    "UnidentifiableError", "WeightEstimate", "assemble_phi_tilde", "assemble_psi_tilde",
    "build_hankel_blocks", "check_identifiability_simplified", "check_identifiability_vanilla",
    "compute_condensed_predictor", "data_enabled_lq", "double_integrator", "estimation_error",
    "lq_oracle", "simulate", "solve_noiseless_simplified", "solve_noiseless_vanilla",
    "solve_noisy_simplified", "solve_noisy_vanilla",
]
__version__ = "0.1.0"
