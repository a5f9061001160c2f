"""Adjoint-based shape optimization of the scalarized flow objectives."""

from .adjoint import converged_factor, shape_gradient, solve_adjoint
from .constraints import project_constraints, constrained_dofs
from .riesz import RieszMap, assemble_elasticity, riesz_map
from .optimizer import (
    GradientCheckReport,
    OptimizationTrace,
    OptimizerConfig,
    ReducedProblem,
    STOP_CONVERGED,
    STOP_LINE_SEARCH,
    STOP_MAX_ITERATIONS,
    STOP_MESH_QUALITY,
    STOP_SOLVER_FAILURE,
    optimize,
    verify_gradient,
)

__all__ = [
    "converged_factor",
    "shape_gradient",
    "solve_adjoint",
    "project_constraints",
    "constrained_dofs",
    "RieszMap",
    "assemble_elasticity",
    "riesz_map",
    "GradientCheckReport",
    "OptimizationTrace",
    "OptimizerConfig",
    "ReducedProblem",
    "optimize",
    "verify_gradient",
    "STOP_CONVERGED",
    "STOP_LINE_SEARCH",
    "STOP_MAX_ITERATIONS",
    "STOP_MESH_QUALITY",
    "STOP_SOLVER_FAILURE",
]
