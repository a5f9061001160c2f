"""Linear-elasticity shape inner product (Riesz map).

Raw coordinate gradients are rough nodal load vectors; representing them in
an elasticity-based inner product yields smooth admissible descent fields
and preserves mesh quality.  Unit Lame parameters; optional inverse-area
stiffening makes small elements more rigid.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..errors import SolverError
from ..fem.elements import P1_GRAD
from ..fem.sparse import SparseFactor
from ..geometry.mesh import Mesh, signed_areas
from .constraints import constrained_dofs, project_constraints

_LAME_MU = 1.0
_LAME_LAMBDA = 1.0


def assemble_elasticity(mesh: Mesh, stiffening_exponent: float = 0.0) -> sp.csr_matrix:
    """P1 vector elasticity stiffness on the current mesh geometry.

    Element blocks are scaled by ``(mean_area / area)**stiffening_exponent``.
    Dof layout: x-displacements of all nodes, then y-displacements.
    """
    tri = mesh.triangles
    m = tri.shape[0]
    n = mesh.n_nodes
    p0, p1, p2 = mesh.nodes[tri[:, 0]], mesh.nodes[tri[:, 1]], mesh.nodes[tri[:, 2]]
    B = np.empty((m, 2, 2))
    B[:, :, 0] = p1 - p0
    B[:, :, 1] = p2 - p0
    det = B[:, 0, 0] * B[:, 1, 1] - B[:, 0, 1] * B[:, 1, 0]
    inv = np.empty_like(B)
    inv[:, 0, 0] = B[:, 1, 1]
    inv[:, 0, 1] = -B[:, 0, 1]
    inv[:, 1, 0] = -B[:, 1, 0]
    inv[:, 1, 1] = B[:, 0, 0]
    inv /= det[:, None, None]
    invBT = np.swapaxes(inv, 1, 2)
    G = np.einsum("mde,ae->mad", invBT, P1_GRAD)   # (M, 3, 2) P1 gradients
    area = np.abs(signed_areas(mesh.nodes, tri))
    scale = area.copy()
    if stiffening_exponent != 0.0:
        scale = area * (area.mean() / area) ** stiffening_exponent

    # K[(a,ca),(b,cb)] = A [ mu (delta_cacb g_a.g_b + g_a[cb] g_b[ca])
    #                        + lambda g_a[ca] g_b[cb] ]
    gg = np.einsum("mad,mbd->mab", G, G)
    elem = np.empty((m, 2, 3, 2, 3))
    for ca in range(2):
        for cb in range(2):
            blk = _LAME_MU * np.einsum("ma,mb->mab", G[:, :, cb], G[:, :, ca])
            blk += _LAME_LAMBDA * np.einsum("ma,mb->mab", G[:, :, ca], G[:, :, cb])
            if ca == cb:
                blk += _LAME_MU * gg
            elem[:, ca, :, cb, :] = scale[:, None, None] * blk
    dofs = np.stack([tri, n + tri], axis=1)        # (M, 2, 3)
    rows = np.repeat(dofs.reshape(m, 6, 1), 6, axis=2).ravel()
    cols = np.repeat(dofs.reshape(m, 1, 6), 6, axis=1).ravel()
    return sp.coo_matrix((elem.reshape(m, 6, 6).ravel(), (rows, cols)),
                         shape=(2 * n, 2 * n)).tocsr()


class RieszMap:
    """Factorized, constraint-aware elasticity solve for one mesh geometry."""

    def __init__(self, mesh: Mesh, stiffening_exponent: float = 0.0,
                 extra_fixed: np.ndarray | None = None):
        self.mesh = mesh
        self.extra_fixed = extra_fixed
        n = mesh.n_nodes
        K = assemble_elasticity(mesh, stiffening_exponent)
        block_x, block_y = constrained_dofs(mesh, extra_fixed)
        blocked = np.concatenate([block_x, block_y])
        keep = sp.diags((~blocked).astype(float))
        pin = sp.diags(blocked.astype(float))
        try:
            self.factor = SparseFactor(keep @ K @ keep + pin)
        except SolverError as exc:
            raise SolverError(
                f"elasticity Riesz system is singular (over-constrained mesh?): {exc}",
                pivot=exc.pivot,
            ) from exc
        self._blocked = blocked
        self._n = n

    def apply(self, raw_gradient: np.ndarray) -> np.ndarray:
        """Smooth admissible representative of a raw nodal gradient."""
        g = project_constraints(self.mesh, raw_gradient, self.extra_fixed)
        rhs = np.concatenate([g[:, 0], g[:, 1]])
        rhs[self._blocked] = 0.0
        d = self.factor.solve(rhs)
        field = np.stack([d[: self._n], d[self._n:]], axis=1)
        # The solve already honors the constraints; the projection only
        # removes factorization round-off on the eliminated dofs.
        return project_constraints(self.mesh, field, self.extra_fixed)


def riesz_map(mesh: Mesh, raw_gradient: np.ndarray,
              stiffening_exponent: float = 0.0) -> np.ndarray:
    return RieszMap(mesh, stiffening_exponent).apply(raw_gradient)
