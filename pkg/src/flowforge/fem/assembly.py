"""Weak-form assembly for the planar and Brinkman flow models.

Momentum residual (test function v, velocity u, pressure p):

    rho (u . grad) u . v  +  mu grad(u) : grad(v)  -  p div(v)  +  kappa u . v

with ``kappa = gamma`` (out-of-plane drag, planar model) or ``kappa =
mu / K`` on porous triangles (Brinkman model).  Continuity: ``div(u) q``.
The outlet is natural (do-nothing), so no boundary terms appear.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import AssemblyError
from .elements import FemSpace, TRI_QW

MODEL_PLANAR = "planar"
MODEL_BRINKMAN = "brinkman"


@dataclass(frozen=True)
class FluidProps:
    """Fluid and medium properties (SI units).

    ``mu_eff`` defaults to ``mu`` (the common choice for Brinkman models).
    ``gamma`` is the linear drag coefficient of the planar closure;
    ``permeability`` is required by the Brinkman model.
    """

    rho: float
    mu: float
    mu_eff: float | None = None
    gamma: float = 0.0
    permeability: float | None = None

    def __post_init__(self):
        if self.rho < 0 or self.mu <= 0:
            raise AssemblyError(f"invalid fluid properties rho={self.rho}, mu={self.mu}")
        if self.mu_eff is not None and self.mu_eff <= 0:
            raise AssemblyError(f"mu_eff must be positive, got {self.mu_eff}")
        if self.gamma < 0:
            raise AssemblyError(f"gamma must be non-negative, got {self.gamma}")
        if self.permeability is not None and not self.permeability > 0:
            raise AssemblyError(f"permeability must be positive, got {self.permeability}")

    @property
    def effective_mu(self) -> float:
        return self.mu if self.mu_eff is None else self.mu_eff


def _element_coefficients(space: FemSpace, props: FluidProps, model: str,
                          porous: np.ndarray | None):
    """Per-element viscosity and zero-order drag coefficient."""
    m = space.mesh.n_triangles
    if model == MODEL_PLANAR:
        mu = np.full(m, props.mu)
        kappa = np.full(m, props.gamma)
    elif model == MODEL_BRINKMAN:
        if porous is None:
            raise AssemblyError(
                "Brinkman model requires a porous-triangle mask; none given"
            )
        porous = np.asarray(porous, dtype=bool)
        if porous.shape != (m,):
            raise AssemblyError(
                f"porous mask shape {porous.shape} does not match {m} triangles"
            )
        if props.permeability is None:
            raise AssemblyError("Brinkman model requires props.permeability")
        mu = np.where(porous, props.effective_mu, props.mu)
        darcy = 0.0 if np.isinf(props.permeability) else props.mu / props.permeability
        kappa = np.where(porous, darcy, 0.0)
    else:
        raise AssemblyError(f"unknown flow model {model!r}")
    return mu, kappa


def _fields_at_qp(space: FemSpace, x: np.ndarray):
    """Velocity, velocity gradient, and pressure at the quadrature points."""
    u = space.velocity(x)                      # (n_p2, 2)
    p = x[2 * space.n_p2:]
    U = u[space.tri_p2]                        # (M, 6, 2)
    P = p[space.mesh.triangles]                # (M, 3)
    u_q = np.einsum("mac,qa->mqc", U, space.phi)
    grad_u = np.einsum("mac,mqad->mqcd", U, space.G)
    p_q = np.einsum("mb,qb->mq", P, space.psi)
    return U, u_q, grad_u, p_q


def assemble_residual(space: FemSpace, x: np.ndarray, props: FluidProps,
                      model: str = MODEL_PLANAR,
                      porous: np.ndarray | None = None) -> np.ndarray:
    mu, kappa = _element_coefficients(space, props, model, porous)
    _, u_q, grad_u, p_q = _fields_at_qp(space, x)
    conv = props.rho * np.einsum("mqd,mqcd->mqc", u_q, grad_u)
    w = TRI_QW[None, :] * space.detB[:, None]  # (M, Q)

    r_mom = np.einsum("mq,mqc,qa->mac", w, conv, space.phi)
    r_mom += np.einsum("m,mq,mqcd,mqad->mac", mu, w, grad_u, space.G)
    r_mom -= np.einsum("mq,mq,mqac->mac", w, p_q, space.G)
    r_mom += np.einsum("m,mq,mqc,qa->mac", kappa, w, u_q, space.phi)
    div_u = grad_u[:, :, 0, 0] + grad_u[:, :, 1, 1]
    r_div = np.einsum("mq,mq,qb->mb", w, div_u, space.psi)

    R = np.zeros(space.ndof)
    for c in range(2):
        np.add.at(R, space.u_dof(space.tri_p2, c).ravel(), r_mom[:, :, c].ravel())
    np.add.at(R, space.p_dof(space.mesh.triangles).ravel(), r_div.ravel())
    return R


def assemble_jacobian(space: FemSpace, x: np.ndarray, props: FluidProps,
                      model: str = MODEL_PLANAR,
                      porous: np.ndarray | None = None) -> sp.csr_matrix:
    """Exact derivative of the discrete residual with respect to all dofs."""
    mu, kappa = _element_coefficients(space, props, model, porous)
    _, u_q, grad_u, p_q = _fields_at_qp(space, x)
    w = TRI_QW[None, :] * space.detB[:, None]
    m = space.mesh.n_triangles
    phi, psi, G = space.phi, space.psi, space.G

    # Velocity-velocity block, (M, a, c, b, cp).
    K_uu = np.zeros((m, 6, 2, 6, 2))
    # rho phi_b grad_u[c, cp] phi_a
    K_uu += props.rho * np.einsum("mq,qa,mqce,qb->macbe", w, phi, grad_u, phi)
    # rho (u . grad phi_b) delta_ccp phi_a
    udotG = np.einsum("mqd,mqbd->mqb", u_q, G)
    conv2 = props.rho * np.einsum("mq,qa,mqb->mab", w, phi, udotG)
    visc = np.einsum("m,mq,mqad,mqbd->mab", mu, w, G, G)
    drag = np.einsum("m,mq,qa,qb->mab", kappa, w, phi, phi)
    for c in range(2):
        K_uu[:, :, c, :, c] += conv2 + visc + drag

    # Velocity-pressure block: -psi_b G[a, c]  -> (M, a, c, b)
    K_up = -np.einsum("mq,qb,mqac->macb", w, psi, G)
    # Pressure-velocity block: psi_b G[a, c]   -> (M, b, a, c)
    K_pu = np.einsum("mq,qb,mqac->mbac", w, psi, G)

    ldof = np.concatenate([
        space.u_dof(space.tri_p2, 0),
        space.u_dof(space.tri_p2, 1),
        space.p_dof(space.mesh.triangles),
    ], axis=1)  # (M, 15)
    elem = np.zeros((m, 15, 15))
    for c in range(2):
        for cp in range(2):
            elem[:, 6 * c: 6 * c + 6, 6 * cp: 6 * cp + 6] = K_uu[:, :, c, :, cp]
        elem[:, 6 * c: 6 * c + 6, 12:] = K_up[:, :, c, :]
        elem[:, 12:, 6 * c: 6 * c + 6] = K_pu[:, :, :, c]

    rows = np.repeat(ldof[:, :, None], 15, axis=2).ravel()
    cols = np.repeat(ldof[:, None, :], 15, axis=1).ravel()
    J = sp.coo_matrix((elem.ravel(), (rows, cols)),
                      shape=(space.ndof, space.ndof)).tocsr()
    return J


def assemble_dresidual_dcoords(space: FemSpace, x: np.ndarray, z: np.ndarray,
                               props: FluidProps, model: str = MODEL_PLANAR,
                               porous: np.ndarray | None = None) -> np.ndarray:
    """Return ``g[v, d] = sum_i z_i d R_i / d X_{v,d}``.

    The contraction of the residual's exact vertex-coordinate derivative with
    a fixed dual vector ``z`` (e.g. the adjoint state), assembled element by
    element without forming the full third-order tensor.
    """
    mu, kappa = _element_coefficients(space, props, model, porous)
    _, u_q, grad_u, p_q = _fields_at_qp(space, x)
    w = TRI_QW[None, :] * space.detB[:, None]
    H = space.H                                     # (M, 3, 2)
    phi, psi, G = space.phi, space.psi, space.G

    zu = space.velocity(z)[space.tri_p2]            # (M, 6, 2)
    zp = z[2 * space.n_p2:][space.mesh.triangles]   # (M, 3)
    zu_q = np.einsum("mac,qa->mqc", zu, phi)
    grad_z = np.einsum("mac,mqad->mqcd", zu, space.G)
    zp_q = np.einsum("mb,qb->mq", zp, psi)

    conv = props.rho * np.einsum("mqd,mqcd->mqc", u_q, grad_u)
    div_u = grad_u[:, :, 0, 0] + grad_u[:, :, 1, 1]

    # Contracted integrands I(q) = z . (momentum + continuity rows).
    I_mom = np.einsum("mqc,mqc->mq", conv, zu_q)
    I_mom += np.einsum("m,mqcd,mqcd->mq", mu, grad_u, grad_z)
    I_mom -= p_q * (grad_z[:, :, 0, 0] + grad_z[:, :, 1, 1])
    I_mom += np.einsum("m,mqc,mqc->mq", kappa, u_q, zu_q)
    I_cont = div_u * zp_q

    g_elem = np.zeros((space.mesh.n_triangles, 3, 2))
    # detB variation: d detB / d X_{v,d} = detB * H[v, d].
    g_elem += np.einsum("mq,mq,mvd->mvd", w, I_mom + I_cont, H)

    # Integrand variation through the basis gradients G' = -H[v] * G[., d].
    uH = np.einsum("mqd,mvd->mqv", u_q, H)          # u . H_v
    zGu = np.einsum("mqc,mqcd->mqd", zu_q, grad_u)  # sum_c zphi_c grad_u[c, d]
    g_elem -= props.rho * np.einsum("mq,mqv,mqd->mvd", w, uH, zGu)

    HgradZ = np.einsum("mvd,mqcd->mqvc", H, grad_z)
    HgradU = np.einsum("mvd,mqcd->mqvc", H, grad_u)
    g_elem -= np.einsum("m,mq,mqvc,mqcd->mvd", mu, w, HgradZ, grad_u)
    g_elem -= np.einsum("m,mq,mqvc,mqcd->mvd", mu, w, HgradU, grad_z)

    Hc_gradZ = np.einsum("mvc,mqcd->mqvd", H, grad_z)
    g_elem += np.einsum("mq,mq,mqvd->mvd", w, p_q, Hc_gradZ)
    Hc_gradU = np.einsum("mvc,mqcd->mqvd", H, grad_u)
    g_elem -= np.einsum("mq,mq,mqvd->mvd", w, zp_q, Hc_gradU)

    g = np.zeros((space.n_vertices, 2))
    np.add.at(g, space.mesh.triangles.ravel(), g_elem.reshape(-1, 2))
    return g
