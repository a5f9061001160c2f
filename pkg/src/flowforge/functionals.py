"""Cost functionals on flow states and their exact discrete derivatives.

Three competing objectives drive the shape optimization:

* uniform channel flow: ``J1 = 1/2 int_{channels} (u - u_des)^2 dx`` with a
  per-channel Poiseuille target profile,
* uniform residence time: ``J2 = 1/2 sum_i (L_i / vbar_i - tau_des)^2``,
* wall shear stress floor on the distributor end walls, enforced through a
  quadratic penalty of the violation:
  ``J3 = int_{wss} min(0, sigma - sigma_thr)^2 ds`` with
  ``sigma = mu * ||(grad u) n||``.

Every evaluator has exact derivatives with respect to both the state dofs
and the mesh vertex coordinates; geometric factors (areas, edge lengths,
normals, basis gradients) are differentiated analytically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, EvaluationError
from .fem.elements import FemSpace, TRI_QP, TRI_QW, EDGE_QW, BoundaryGeometry, p1_basis
from .geometry.mesh import NODE_AXIAL, TAG_WSS_IN, TAG_WSS_OUT

_LAMBDA_QP = p1_basis(TRI_QP)  # barycentric coordinates at the volume rule


@dataclass(frozen=True)
class FunctionalConfig:
    """Targets of the three cost functionals.

    ``flow_rate_des`` is the desired volumetric rate per channel [m^3/s],
    realized as a Poiseuille profile of peak ``1.5 * flow_rate_des /
    (width * depth)``; ``depth`` must match the inflow conversion depth.
    """

    flow_rate_des: float
    tau_des: float
    sigma_thr: float
    wss_boundaries: tuple[str, ...] = (TAG_WSS_IN, TAG_WSS_OUT)
    depth: float | None = None

    def __post_init__(self):
        if self.flow_rate_des <= 0:
            raise ConfigurationError("flow_rate_des must be positive")
        if self.tau_des <= 0:
            raise ConfigurationError("tau_des must be positive")
        if self.sigma_thr <= 0:
            raise ConfigurationError("sigma_thr must be positive")
        bad = set(self.wss_boundaries) - {TAG_WSS_IN, TAG_WSS_OUT}
        if bad:
            raise ConfigurationError(f"unknown wss boundaries {sorted(bad)}")

    @property
    def effective_depth(self) -> float:
        return 1.0 if self.depth is None else self.depth


@dataclass(frozen=True)
class CostVector:
    """Raw functional values with the frozen initial-domain normalizers."""

    j1: float
    j2: float
    j3: float
    normalizers: tuple[float, float, float] | None = None

    @property
    def raw(self) -> tuple[float, float, float]:
        return (self.j1, self.j2, self.j3)

    @property
    def normalized(self) -> tuple[float, float, float]:
        if self.normalizers is None:
            raise ConfigurationError("cost vector has no normalizers attached")
        return tuple(v / n for v, n in zip(self.raw, self.normalizers))


def channel_frames(space: FemSpace):
    """Per-channel (center_x, width) from the side-wall node positions."""
    mesh = space.mesh
    n = mesh.n_channels
    centers = np.empty(n)
    widths = np.empty(n)
    for i in range(1, n + 1):
        sel = (mesh.node_kind == NODE_AXIAL) & (mesh.node_channel == i)
        if sel.any():
            xs = mesh.nodes[sel, 0]
        else:
            tris = mesh.channel_triangles(i)
            if tris.size == 0:
                raise ConfigurationError(f"channel {i} has no triangles")
            xs = mesh.nodes[np.unique(mesh.triangles[tris]), 0]
        centers[i - 1] = 0.5 * (xs.min() + xs.max())
        widths[i - 1] = xs.max() - xs.min()
    return centers, widths


def _channel_quadrature(space: FemSpace, i: int):
    """Triangles, weights (w * detB), quad coordinates for channel ``i``."""
    tris = space.mesh.channel_triangles(i)
    if tris.size == 0:
        raise EvaluationError(f"channel {i} has no triangles")
    w = TRI_QW[None, :] * space.detB[tris, None]
    verts = space.coords[space.mesh.triangles[tris]]        # (m, 3, 2)
    xq = np.einsum("qv,mvd->mqd", _LAMBDA_QP, verts)        # (m, Q, 2)
    return tris, w, xq


def desired_velocity_profile(cfg: FunctionalConfig, center: float, width: float,
                             axis: np.ndarray, x: np.ndarray):
    """Target velocity vectors and the x-derivative of the axial speed."""
    peak = 1.5 * cfg.flow_rate_des / (width * cfg.effective_depth)
    xi = (x - center) / (width / 2.0)
    speed = peak * (1.0 - xi * xi)
    dspeed = peak * (-2.0 * xi) / (width / 2.0)
    return speed[..., None] * axis, dspeed[..., None] * axis


def interpolate_desired_velocity(space: FemSpace, cfg: FunctionalConfig) -> np.ndarray:
    """State vector whose velocity equals the J1 target on the channels."""
    x = np.zeros(space.ndof)
    centers, widths = channel_frames(space)
    mesh = space.mesh
    for i in range(1, mesh.n_channels + 1):
        tris = mesh.channel_triangles(i)
        nodes = np.unique(space.tri_p2[tris])
        u_des, _ = desired_velocity_profile(
            cfg, centers[i - 1], widths[i - 1], mesh.channel_axes[i - 1],
            space.p2_coords[nodes, 0],
        )
        x[space.u_dof(nodes, 0)] = u_des[:, 0]
        x[space.u_dof(nodes, 1)] = u_des[:, 1]
    return x


# ---------------------------------------------------------------------------
# J1: uniform flow
# ---------------------------------------------------------------------------

def eval_J1(space: FemSpace, x: np.ndarray, cfg: FunctionalConfig) -> float:
    if space.mesh.n_channels == 0 or not (space.mesh.tri_channel > 0).any():
        raise ConfigurationError("mesh has no channel labels; J1 undefined")
    u = space.velocity(x)
    centers, widths = channel_frames(space)
    total = 0.0
    for i in range(1, space.mesh.n_channels + 1):
        tris, w, xq = _channel_quadrature(space, i)
        u_q = np.einsum("mac,qa->mqc", u[space.tri_p2[tris]], space.phi)
        u_des, _ = desired_velocity_profile(
            cfg, centers[i - 1], widths[i - 1],
            space.mesh.channel_axes[i - 1], xq[:, :, 0],
        )
        e = u_q - u_des
        total += 0.5 * float(np.einsum("mq,mqc,mqc->", w, e, e))
    return total


def dJ1_dstate(space: FemSpace, x: np.ndarray, cfg: FunctionalConfig) -> np.ndarray:
    u = space.velocity(x)
    centers, widths = channel_frames(space)
    out = np.zeros(space.ndof)
    for i in range(1, space.mesh.n_channels + 1):
        tris, w, xq = _channel_quadrature(space, i)
        nodes = space.tri_p2[tris]
        u_q = np.einsum("mac,qa->mqc", u[nodes], space.phi)
        u_des, _ = desired_velocity_profile(
            cfg, centers[i - 1], widths[i - 1],
            space.mesh.channel_axes[i - 1], xq[:, :, 0],
        )
        e = u_q - u_des
        r = np.einsum("mq,mqc,qa->mac", w, e, space.phi)
        for c in range(2):
            np.add.at(out, space.u_dof(nodes, c).ravel(), r[:, :, c].ravel())
    return out


def dJ1_dcoords(space: FemSpace, x: np.ndarray, cfg: FunctionalConfig) -> np.ndarray:
    u = space.velocity(x)
    centers, widths = channel_frames(space)
    out = np.zeros((space.n_vertices, 2))
    for i in range(1, space.mesh.n_channels + 1):
        tris, w, xq = _channel_quadrature(space, i)
        nodes = space.tri_p2[tris]
        u_q = np.einsum("mac,qa->mqc", u[nodes], space.phi)
        u_des, du_des_dx = desired_velocity_profile(
            cfg, centers[i - 1], widths[i - 1],
            space.mesh.channel_axes[i - 1], xq[:, :, 0],
        )
        e = u_q - u_des
        e2 = np.einsum("mqc,mqc->mq", e, e)
        H = space.H[tris]
        g_elem = 0.5 * np.einsum("mq,mq,mvd->mvd", w, e2, H)
        # Quadrature points move with the vertices: x_q = sum_v lambda_v X_v.
        chain = -np.einsum("mq,mqc,mqc,qv->mv", w, e, du_des_dx, _LAMBDA_QP)
        g_elem[:, :, 0] += chain
        np.add.at(out, space.mesh.triangles[tris].ravel(), g_elem.reshape(-1, 2))
    return out


# ---------------------------------------------------------------------------
# J2: uniform residence time
# ---------------------------------------------------------------------------

def _channel_integrals(space: FemSpace, x: np.ndarray, i: int):
    """(area, axial momentum integral, triangles, weights) for channel i."""
    tris, w, _ = _channel_quadrature(space, i)
    u = space.velocity(x)
    u_q = np.einsum("mac,qa->mqc", u[space.tri_p2[tris]], space.phi)
    axis = space.mesh.channel_axes[i - 1]
    area = float(w.sum())
    s = float(np.einsum("mq,mqc,c->", w, u_q, axis))
    return area, s, tris, w


def channel_mean_velocity(space: FemSpace, x: np.ndarray, i: int) -> float:
    """Average axial speed ``|int_{Omega_i} u . axis dx| / area_i``."""
    area, s, _, _ = _channel_integrals(space, x, i)
    if area <= 0.0:
        raise EvaluationError(f"channel {i} has non-positive area")
    return abs(s) / area


def residence_times(space: FemSpace, x: np.ndarray) -> np.ndarray:
    """Per-channel residence time ``L_i / vbar_i``."""
    _, widths = channel_frames(space)
    out = np.empty(space.mesh.n_channels)
    for i in range(1, space.mesh.n_channels + 1):
        area, s, _, _ = _channel_integrals(space, x, i)
        if s == 0.0:
            raise EvaluationError(f"channel {i} is stagnant (zero mean velocity)")
        out[i - 1] = area * area / (widths[i - 1] * abs(s))
    return out


def eval_J2(space: FemSpace, x: np.ndarray, cfg: FunctionalConfig) -> float:
    tau = residence_times(space, x)
    return 0.5 * float(((tau - cfg.tau_des) ** 2).sum())


def dJ2_dstate(space: FemSpace, x: np.ndarray, cfg: FunctionalConfig) -> np.ndarray:
    _, widths = channel_frames(space)
    out = np.zeros(space.ndof)
    for i in range(1, space.mesh.n_channels + 1):
        area, s, tris, w = _channel_integrals(space, x, i)
        if s == 0.0:
            raise EvaluationError(f"channel {i} is stagnant (zero mean velocity)")
        tau = area * area / (widths[i - 1] * abs(s))
        coef = (tau - cfg.tau_des) * (-area * area / widths[i - 1]) * np.sign(s) / s**2
        axis = space.mesh.channel_axes[i - 1]
        nodes = space.tri_p2[tris]
        mass = np.einsum("mq,qa->ma", w, space.phi)
        for c in range(2):
            np.add.at(out, space.u_dof(nodes, c).ravel(),
                      (coef * axis[c]) * mass.ravel())
    return out


def dJ2_dcoords(space: FemSpace, x: np.ndarray, cfg: FunctionalConfig) -> np.ndarray:
    u = space.velocity(x)
    out = np.zeros((space.n_vertices, 2))
    _, widths = channel_frames(space)
    for i in range(1, space.mesh.n_channels + 1):
        area, s, tris, w = _channel_integrals(space, x, i)
        if s == 0.0:
            raise EvaluationError(f"channel {i} is stagnant (zero mean velocity)")
        tau = area * area / (widths[i - 1] * abs(s))
        dJ_dtau = tau - cfg.tau_des
        dtau_dA = 2.0 * area / (widths[i - 1] * abs(s))
        dtau_dS = -(area * area / widths[i - 1]) * np.sign(s) / s**2
        H = space.H[tris]
        u_q = np.einsum("mac,qa->mqc", u[space.tri_p2[tris]], space.phi)
        ua = np.einsum("mqc,c->mq", u_q, space.mesh.channel_axes[i - 1])
        dA = np.einsum("mq,mvd->mvd", w, H)
        dS = np.einsum("mq,mq,mvd->mvd", w, ua, H)
        g_elem = dJ_dtau * (dtau_dA * dA + dtau_dS * dS)
        np.add.at(out, space.mesh.triangles[tris].ravel(), g_elem.reshape(-1, 2))
    return out


# ---------------------------------------------------------------------------
# J3: wall shear stress
# ---------------------------------------------------------------------------

def _wss_geometry(space: FemSpace, cfg: FunctionalConfig) -> BoundaryGeometry:
    geom = space.boundary_geometry(tuple(cfg.wss_boundaries))
    if geom.edges.shape[0] == 0:
        raise ConfigurationError(
            f"mesh has no boundary edges tagged {cfg.wss_boundaries}"
        )
    return geom


def eval_wss(space: FemSpace, x: np.ndarray, mu: float,
             geom: BoundaryGeometry):
    """Wall shear stress samples at the edge quadrature points.

    Returns ``(sigma, length, normal, grad_u)`` with ``sigma`` of shape
    (E, Q); the gradient is evaluated one-sidedly from the adjacent element.
    """
    _, length, normal, G = geom.geometry(space.coords)
    u = space.velocity(x)[space.tri_p2[geom.tri]]           # (E, 6, 2)
    grad_u = np.einsum("eac,eqad->eqcd", u, G)              # (E, Q, 2, 2)
    g = np.einsum("eqcd,ed->eqc", grad_u, normal)
    sigma = mu * np.sqrt(np.einsum("eqc,eqc->eq", g, g))
    return sigma, length, normal, grad_u


def eval_J3(space: FemSpace, x: np.ndarray, cfg: FunctionalConfig,
            mu: float) -> float:
    geom = _wss_geometry(space, cfg)
    sigma, length, _, _ = eval_wss(space, x, mu, geom)
    m = np.minimum(0.0, sigma - cfg.sigma_thr)
    return float(np.einsum("e,q,eq->", length, EDGE_QW, m * m))


def wss_violation_fraction(space: FemSpace, x: np.ndarray, cfg: FunctionalConfig,
                           mu: float) -> float:
    """Fraction of the wss boundary length where sigma < sigma_thr."""
    geom = _wss_geometry(space, cfg)
    sigma, length, _, _ = eval_wss(space, x, mu, geom)
    below = (sigma < cfg.sigma_thr).astype(float)
    violating = float(np.einsum("e,q,eq->", length, EDGE_QW, below))
    return violating / float(length.sum())


_SIGMA_FLOOR = 1e-300


def dJ3_dstate(space: FemSpace, x: np.ndarray, cfg: FunctionalConfig,
               mu: float) -> np.ndarray:
    geom = _wss_geometry(space, cfg)
    _, length, normal, G = geom.geometry(space.coords)
    u = space.velocity(x)[space.tri_p2[geom.tri]]
    grad_u = np.einsum("eac,eqad->eqcd", u, G)
    g = np.einsum("eqcd,ed->eqc", grad_u, normal)
    gnorm = np.sqrt(np.einsum("eqc,eqc->eq", g, g))
    sigma = mu * gnorm
    m = np.minimum(0.0, sigma - cfg.sigma_thr)
    ghat = g / np.maximum(gnorm, _SIGMA_FLOOR)[:, :, None]
    active = (m < 0.0) & (gnorm > _SIGMA_FLOOR)
    # d sigma / d U[a, c] = mu * ghat_c * (G_a . n)
    Gn = np.einsum("eqad,ed->eqa", G, normal)
    coef = np.where(active, 2.0 * m, 0.0) * length[:, None] * EDGE_QW[None, :]
    r = mu * np.einsum("eq,eqc,eqa->eac", coef, ghat, Gn)
    out = np.zeros(space.ndof)
    nodes = space.tri_p2[geom.tri]
    for c in range(2):
        np.add.at(out, space.u_dof(nodes, c).ravel(), r[:, :, c].ravel())
    return out


def dJ3_dcoords(space: FemSpace, x: np.ndarray, cfg: FunctionalConfig,
                mu: float) -> np.ndarray:
    geom = _wss_geometry(space, cfg)
    tvec, length, normal, G = geom.geometry(space.coords)
    that = tvec / length[:, None]
    u = space.velocity(x)[space.tri_p2[geom.tri]]
    grad_u = np.einsum("eac,eqad->eqcd", u, G)
    g = np.einsum("eqcd,ed->eqc", grad_u, normal)
    gnorm = np.sqrt(np.einsum("eqc,eqc->eq", g, g))
    sigma = mu * gnorm
    m = np.minimum(0.0, sigma - cfg.sigma_thr)
    ghat = g / np.maximum(gnorm, _SIGMA_FLOOR)[:, :, None]
    active = (m < 0.0) & (gnorm > _SIGMA_FLOOR)
    two_m = np.where(active, 2.0 * m, 0.0)
    out = np.zeros((space.n_vertices, 2))

    # Edge-length variation: d|e|/dX_b = that, dX_a = -that.
    m2int = np.einsum("q,eq->e", EDGE_QW, m * m)
    np.add.at(out, geom.edges[:, 1], m2int[:, None] * that)
    np.add.at(out, geom.edges[:, 0], -m2int[:, None] * that)

    # Normal variation: n = s R t / |t|; dn(dt) = (s R dt - n (that . dt)) / |t|.
    # s R e_d for d = x, y with R = [[0, 1], [-1, 0]] times the stored sign.
    sign = np.einsum("ed,ed->e", normal, np.stack([tvec[:, 1], -tvec[:, 0]], axis=1))
    sign = np.sign(sign)
    dsig_dn = mu * np.einsum("eqc,eqcd->eqd", ghat, grad_u)   # (E, Q, 2)
    coef = length[:, None] * EDGE_QW[None, :] * two_m         # (E, Q)
    w_dn = np.einsum("eq,eqd->ed", coef, dsig_dn)
    # For endpoint b: dt = e_k -> dn = (s R e_k - n that_k) / |e|.
    Re = np.stack([
        np.stack([np.zeros_like(sign), -sign], axis=1),   # R e_x = (0, -1) * s
        np.stack([sign, np.zeros_like(sign)], axis=1),    # R e_y = (1, 0) * s
    ], axis=1)  # (E, k, 2)
    dn_db = (Re - normal[:, None, :] * that[:, :, None]) / length[:, None, None]
    contrib_b = np.einsum("ed,ekd->ek", w_dn, dn_db)
    np.add.at(out, geom.edges[:, 1], contrib_b)
    np.add.at(out, geom.edges[:, 0], -contrib_b)

    # Gradient-operator variation: dG_a[d] = -H_v[d] G_a[f] for slot (v, f).
    H = space.H[geom.tri]                                     # (E, 3, 2)
    dsig_dDu = mu * np.einsum("eqc,ed->eqcd", ghat, normal)   # dsigma/dDu[c,d]
    S = np.einsum("eqcd,eqcf->eqdf", dsig_dDu, grad_u)        # sum_c dsig*Du[c,f]
    g_tri = -np.einsum("eq,evd,eqdf->evf", coef, H, S)
    np.add.at(out, space.mesh.triangles[geom.tri].ravel(), g_tri.reshape(-1, 2))
    return out


# ---------------------------------------------------------------------------
# Scalarization
# ---------------------------------------------------------------------------

def evaluate_costs(space: FemSpace, x: np.ndarray, cfg: FunctionalConfig,
                   mu: float, normalizers=None) -> CostVector:
    return CostVector(
        j1=eval_J1(space, x, cfg),
        j2=eval_J2(space, x, cfg),
        j3=eval_J3(space, x, cfg, mu),
        normalizers=tuple(normalizers) if normalizers is not None else None,
    )


def check_weights(lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (3,):
        raise ConfigurationError(f"weight vector must have 3 entries, got {lam.shape}")
    if (lam < 0).any():
        raise ConfigurationError(f"weights must be non-negative, got {lam}")
    if lam.sum() <= 0:
        raise ConfigurationError("weight vector must not be all zero")
    return lam


def check_normalizers(normalizers, lam=None) -> np.ndarray:
    """Validate normalizers; only the components with active weight must be
    positive when a weight vector is given."""
    n = np.asarray(normalizers, dtype=float)
    if n.shape != (3,):
        raise ConfigurationError("normalizers must have 3 entries")
    active = np.ones(3, dtype=bool) if lam is None else np.asarray(lam) != 0.0
    if (n[active] <= 0).any() or not np.all(np.isfinite(n[active])):
        raise ConfigurationError(
            f"normalizers must be positive (initial-domain functional values), got {n}"
        )
    return n


def eval_scalarized(space: FemSpace, x: np.ndarray, cfg: FunctionalConfig,
                    lam, normalizers, mu: float) -> float:
    lam = check_weights(lam)
    norm = check_normalizers(normalizers, lam)
    total = 0.0
    if lam[0] != 0.0:
        total += lam[0] * eval_J1(space, x, cfg) / norm[0]
    if lam[1] != 0.0:
        total += lam[1] * eval_J2(space, x, cfg) / norm[1]
    if lam[2] != 0.0:
        total += lam[2] * eval_J3(space, x, cfg, mu) / norm[2]
    return float(total)


def functional_derivatives(space: FemSpace, x: np.ndarray, cfg: FunctionalConfig,
                           lam, normalizers, mu: float):
    """Exact derivatives of the scalarized objective.

    Returns ``(dJ_dstate, dJ_dcoords)`` of the weighted, normalized sum.
    """
    lam = check_weights(lam)
    norm = check_normalizers(normalizers, lam)
    dstate = np.zeros(space.ndof)
    dcoords = np.zeros((space.n_vertices, 2))
    if lam[0] != 0.0:
        dstate += (lam[0] / norm[0]) * dJ1_dstate(space, x, cfg)
        dcoords += (lam[0] / norm[0]) * dJ1_dcoords(space, x, cfg)
    if lam[1] != 0.0:
        dstate += (lam[1] / norm[1]) * dJ2_dstate(space, x, cfg)
        dcoords += (lam[1] / norm[1]) * dJ2_dcoords(space, x, cfg)
    if lam[2] != 0.0:
        dstate += (lam[2] / norm[2]) * dJ3_dstate(space, x, cfg, mu)
        dcoords += (lam[2] / norm[2]) * dJ3_dcoords(space, x, cfg, mu)
    return dstate, dcoords
