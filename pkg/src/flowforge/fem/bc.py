"""Dirichlet data and boundary-condition application.

Inlet: parabolic (Poiseuille) profile normalized to the prescribed flow
rate.  Walls and fluid-porous interfaces in the planar model: no slip.
Symmetry: zero normal velocity, free tangential traction (strong constraint
on the normal component; symmetry edges must be axis aligned).  Outlet:
natural do-nothing condition, which also fixes the pressure level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import ConfigurationError
from ..geometry.mesh import TAG_IN, TAG_INT, TAG_SYM, TAG_WALL, TAG_WSS_IN, TAG_WSS_OUT
from .elements import FemSpace


@dataclass(frozen=True)
class InflowSpec:
    """Inlet flow specification.

    ``flow_rate`` is the volumetric rate through the full inlet [m^3/s];
    under half symmetry the meshed half carries half of it.  ``depth`` is
    the out-of-plane depth used to convert to the planar line flux
    (``None`` means unit depth).
    """

    flow_rate: float
    depth: float | None = None

    @property
    def effective_depth(self) -> float:
        return 1.0 if self.depth is None else self.depth

    @property
    def planar_rate(self) -> float:
        """Line flux [m^2/s] through the full inlet width."""
        return self.flow_rate / self.effective_depth


@dataclass(frozen=True)
class DirichletSet:
    """Constrained dof indices with their imposed values."""

    dofs: np.ndarray
    values: np.ndarray

    def apply_to_state(self, x: np.ndarray) -> np.ndarray:
        x = x.copy()
        x[self.dofs] = self.values
        return x

    @property
    def mask(self):
        return self.dofs


def build_dirichlet(space: FemSpace, inflow: InflowSpec) -> DirichletSet:
    """Assemble the Dirichlet dof set for the flow problem on this mesh."""
    mesh = space.mesh
    values: dict[int, float] = {}

    def constrain(dof: int, value: float) -> None:
        values[dof] = value

    in_edges = mesh.edges_with_tag(TAG_IN)
    if in_edges.shape[0] == 0 or mesh.boundary_length(TAG_IN) <= 0.0:
        raise ConfigurationError("mesh has no inlet edges (tag IN) of positive length")
    halfwidth = mesh.inflow_halfwidth
    if halfwidth <= 0.0:
        raise ConfigurationError("mesh inflow halfwidth must be positive")
    # Peak of the full-width parabola realizing the planar flow rate.
    v_max = 0.75 * inflow.planar_rate / halfwidth

    # Inflow direction: opposite to the outward normal of the inlet edges.
    a, b = in_edges[0]
    tvec = mesh.nodes[b] - mesh.nodes[a]
    normal = np.array([tvec[1], -tvec[0]]) / np.hypot(tvec[0], tvec[1])
    interior = mesh.nodes.mean(axis=0)
    if normal @ (0.5 * (mesh.nodes[a] + mesh.nodes[b]) - interior) < 0.0:
        normal = -normal
    direction = -normal

    # The wall-shear-stress boundaries and the fluid-porous interface are
    # no-slip walls in this model; their tags only mark them for the J3
    # functional and for interface replacement in the Brinkman extension.
    for tag in (TAG_WALL, TAG_INT, TAG_WSS_IN, TAG_WSS_OUT):
        for ea, eb in mesh.edges_with_tag(tag):
            for node in space.p2_nodes_of_boundary_edge(ea, eb):
                constrain(int(space.u_dof(node, 0)), 0.0)
                constrain(int(space.u_dof(node, 1)), 0.0)
    for ea, eb in in_edges:
        for node in space.p2_nodes_of_boundary_edge(ea, eb):
            xi = (space.p2_coords[node, 0] - mesh.inflow_center) / halfwidth
            speed = v_max * max(0.0, 1.0 - xi * xi)
            constrain(int(space.u_dof(node, 0)), direction[0] * speed)
            constrain(int(space.u_dof(node, 1)), direction[1] * speed)
    sym_edges = mesh.edges_with_tag(TAG_SYM)
    for ea, eb in sym_edges:
        t = mesh.nodes[eb] - mesh.nodes[ea]
        if abs(t[0]) > 1e-12 * abs(t[1]):
            raise ConfigurationError("symmetry edges must be axis aligned (vertical)")
        for node in space.p2_nodes_of_boundary_edge(ea, eb):
            dof = int(space.u_dof(node, 0))  # normal component = x
            if dof not in values:
                constrain(dof, 0.0)

    dofs = np.array(sorted(values), dtype=np.int64)
    vals = np.array([values[d] for d in dofs])
    return DirichletSet(dofs=dofs, values=vals)


def apply_boundary_conditions(J: sp.csr_matrix, R: np.ndarray,
                              dirichlet: DirichletSet):
    """Symmetric elimination of Dirichlet dofs.

    Rows and columns of constrained dofs are replaced by identity and the
    corresponding residual entries zeroed (states are kept exactly on the
    constraint, so Newton corrections there vanish).  Keeping the matrix
    symmetric in structure makes the transposed (adjoint) solve consistent.
    """
    ndof = R.shape[0]
    keep = np.ones(ndof)
    keep[dirichlet.dofs] = 0.0
    D = sp.diags(keep)
    pin = sp.coo_matrix(
        (np.ones(dirichlet.dofs.size), (dirichlet.dofs, dirichlet.dofs)),
        shape=(ndof, ndof),
    )
    J_mod = (D @ J @ D + pin).tocsc()
    R_mod = R * keep
    return J_mod, R_mod


def free_residual_norm(R: np.ndarray, dirichlet: DirichletSet) -> float:
    R = R.copy()
    R[dirichlet.dofs] = 0.0
    return float(np.linalg.norm(R))
