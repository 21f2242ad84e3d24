"""Normalized solutions of nonlinear Schrodinger equations on radial grids.

Scalar problems ``-Delta u - lam u = f(u)`` with prescribed mass, and the
two-component cubic system in R^3 with repulsive coupling, solved through the
Pohozaev constraint.
"""
from .diagnostics import Certificate, CheckEntry, certify, certify_trace
from .errors import (ContinuationStalled, Diverged, LiouvilleSuspect, NormsolError,
                     SingularJacobian, StagnationError)
from .functionals import CouplingParams, Nonlinearity, StatePair, energy_J, project_to_P
from .grid import RadialField, RadialGrid
from .scalar import (ScalarSolution, excited_state_by_nodes, ground_state_by_scaling,
                     minimize_on_M)
from .system import (ContinuationTrace, SystemSolution, build_endpoints, coexistence_state,
                     continue_in_beta, mountain_pass_on_P, newton_polish)

__version__ = "0.1.0"

__all__ = [
    "Certificate", "CheckEntry", "ContinuationStalled", "ContinuationTrace", "CouplingParams",
    "Diverged", "LiouvilleSuspect", "Nonlinearity", "NormsolError", "RadialField",
    "RadialGrid", "ScalarSolution", "SingularJacobian", "StagnationError", "StatePair",
    "SystemSolution", "build_endpoints", "certify", "certify_trace", "coexistence_state",
    "continue_in_beta", "energy_J", "excited_state_by_nodes", "ground_state_by_scaling",
    "minimize_on_M", "mountain_pass_on_P", "newton_polish", "project_to_P",
]
