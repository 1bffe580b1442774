"""Rotating mirror-symmetric Vlasov-Poisson steady states.

Construction path: polytropic base state -> ray deformation ansatz ->
chord-Newton continuation in the angular velocity, with per-state
verification of the structural properties (symmetries, support, maximum-
principle constant, Poisson residual).
"""

__version__ = "0.1.0"

from .ansatz import AnsatzParams, f_eval, h_derivatives, h_eval, phi_eval, tilde_h
from .basestate import RadialProfile, build_base_state, profile_eval, solve_emden
from .config import Bundle, SolverConfig, build_bundle
from .deformation import (DeformationField, FieldSpace, YField, g_apply,
                          g_inverse, g_jacobian, x_norm, y_norm)
from .harmonics import SymmetryBasis, legendre_P, newtonian_potential
from .linearized import apply_dT, apply_K, apply_L0, assemble_Kn, solve_L0
from .operator import DensityField, OperatorContext, SolutionState, poisson_residual
from .solver import ContinuationConfig, continuation, newton_solve
from .diagnostics import integrate_characteristic, measure_symmetry

__all__ = [
    "AnsatzParams", "Bundle", "ContinuationConfig", "DeformationField",
    "DensityField", "FieldSpace", "OperatorContext", "RadialProfile",
    "SolutionState", "SolverConfig", "SymmetryBasis", "YField",
    "apply_K", "apply_L0", "apply_dT", "assemble_Kn", "build_base_state",
    "build_bundle", "continuation", "f_eval", "g_apply", "g_inverse",
    "g_jacobian", "h_derivatives", "h_eval", "integrate_characteristic",
    "legendre_P", "measure_symmetry", "newton_solve", "newtonian_potential",
    "phi_eval", "poisson_residual", "profile_eval", "solve_L0", "solve_emden",
    "tilde_h", "x_norm", "y_norm",
]
