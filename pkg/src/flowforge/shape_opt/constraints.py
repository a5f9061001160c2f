"""Projection onto the admissible deformation space.

Admissible displacements vanish on inlet, outlet, symmetry, and outer wall
nodes and keep only the along-axis component on channel side walls (the
channels may change in length but not in width or position).
"""

from __future__ import annotations

import numpy as np

from ..geometry.mesh import Mesh, NODE_AXIAL, NODE_FIXED


def project_constraints(mesh: Mesh, field: np.ndarray,
                        extra_fixed: np.ndarray | None = None) -> np.ndarray:
    """Componentwise orthogonal projection; idempotent by construction.

    ``extra_fixed`` optionally pins additional nodes (used by the optimizer
    to lock regions whose mesh quality has reached the floor).
    """
    d = np.array(field, dtype=float, copy=True)
    if d.shape != (mesh.n_nodes, 2):
        raise ValueError(f"field shape {d.shape} does not match mesh ({mesh.n_nodes}, 2)")
    d[mesh.node_kind == NODE_FIXED] = 0.0
    if extra_fixed is not None:
        d[extra_fixed] = 0.0
    axial = np.nonzero(mesh.node_kind == NODE_AXIAL)[0]
    if axial.size:
        axes = mesh.channel_axes[mesh.node_channel[axial] - 1]
        along = np.einsum("ij,ij->i", d[axial], axes)
        d[axial] = along[:, None] * axes
    return d


def constrained_dofs(mesh: Mesh,
                     extra_fixed: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Displacement dofs eliminated by the constraints, as (x-dofs, y-dofs)
    boolean masks over nodes.  Axis-aligned channels only: the across-axis
    component of a side-wall node is a single coordinate."""
    fixed = mesh.node_kind == NODE_FIXED
    if extra_fixed is not None:
        fixed = fixed | np.asarray(extra_fixed, dtype=bool)
    block_x = fixed.copy()
    block_y = fixed.copy()
    axial = np.nonzero(mesh.node_kind == NODE_AXIAL)[0]
    for v in axial:
        axis = mesh.channel_axes[mesh.node_channel[v] - 1]
        if abs(axis[0]) < 1e-12:      # vertical channel: x is blocked
            block_x[v] = True
        elif abs(axis[1]) < 1e-12:    # horizontal channel: y is blocked
            block_y[v] = True
        else:
            raise NotImplementedError(
                "constrained_dofs supports axis-aligned channels only"
            )
    return block_x, block_y
