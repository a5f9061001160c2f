"""Taylor-Hood finite element core for the planar and Brinkman flow models."""

from .elements import FemSpace, BoundaryGeometry, TRI_QP, TRI_QW, EDGE_QP, EDGE_QW
from .assembly import (
    FluidProps,
    MODEL_PLANAR,
    MODEL_BRINKMAN,
    assemble_residual,
    assemble_jacobian,
    assemble_dresidual_dcoords,
)
from .bc import InflowSpec, DirichletSet, build_dirichlet, apply_boundary_conditions
from .newton import FlowState, newton_solve, boundary_net_flux
from .sparse import SparseFactor, sparse_solve

__all__ = [
    "FemSpace",
    "BoundaryGeometry",
    "FluidProps",
    "InflowSpec",
    "DirichletSet",
    "FlowState",
    "MODEL_PLANAR",
    "MODEL_BRINKMAN",
    "assemble_residual",
    "assemble_jacobian",
    "assemble_dresidual_dcoords",
    "build_dirichlet",
    "apply_boundary_conditions",
    "newton_solve",
    "boundary_net_flux",
    "sparse_solve",
    "SparseFactor",
    "TRI_QP",
    "TRI_QW",
    "EDGE_QP",
    "EDGE_QW",
]
