"""Discrete adjoint solve and shape gradient assembly.

The reduced objective treats the state as an implicit function of the mesh
vertex coordinates through the discrete flow equations.  With the adjoint
``z`` solving ``J_state^T z = -dJ/dstate`` on the free dofs, the exact
gradient of the reduced objective is ``dJ/dX + z^T dR/dX``.
"""

from __future__ import annotations

import numpy as np

from ..fem.assembly import (
    FluidProps,
    assemble_dresidual_dcoords,
    assemble_jacobian,
)
from ..fem.bc import DirichletSet, apply_boundary_conditions
from ..fem.elements import FemSpace
from ..fem.sparse import SparseFactor


def converged_factor(space: FemSpace, x: np.ndarray, props: FluidProps,
                     model: str, porous, dirichlet: DirichletSet) -> SparseFactor:
    """Factorize the boundary-conditioned Jacobian at the converged state."""
    J = assemble_jacobian(space, x, props, model, porous)
    J_mod, _ = apply_boundary_conditions(J, np.zeros(space.ndof), dirichlet)
    return SparseFactor(J_mod)


def solve_adjoint(factor: SparseFactor, dJ_dstate: np.ndarray,
                  dirichlet: DirichletSet) -> np.ndarray:
    """Adjoint state; zero on Dirichlet dofs by construction."""
    rhs = -np.asarray(dJ_dstate, dtype=float).copy()
    rhs[dirichlet.dofs] = 0.0
    return factor.solve_transposed(rhs)


def shape_gradient(space: FemSpace, x: np.ndarray, z: np.ndarray,
                   props: FluidProps, model: str, porous,
                   dJ_dcoords: np.ndarray) -> np.ndarray:
    """Raw (unsmoothed, unprojected) gradient w.r.t. vertex coordinates."""
    return dJ_dcoords + assemble_dresidual_dcoords(space, x, z, props, model, porous)
