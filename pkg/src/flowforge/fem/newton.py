"""Newton solution of the discrete flow models with density continuation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace as dc_replace

import numpy as np

from ..errors import SolverError
from .assembly import FluidProps, MODEL_PLANAR, assemble_jacobian, assemble_residual
from .bc import DirichletSet, InflowSpec, apply_boundary_conditions, build_dirichlet, free_residual_norm
from .elements import FemSpace, EDGE_QP, EDGE_QW, BoundaryGeometry
from .sparse import SparseFactor

log = logging.getLogger(__name__)


@dataclass
class FlowState:
    """Converged (or best-effort) discrete solution of a flow model."""

    x: np.ndarray
    residual_norm: float
    newton_iterations: int
    converged: bool
    model: str
    residual_history: list = field(default_factory=list)
    factor: SparseFactor | None = None
    dirichlet: DirichletSet | None = None

    def velocity(self, space: FemSpace) -> np.ndarray:
        return space.velocity(self.x)

    def pressure(self, space: FemSpace) -> np.ndarray:
        return self.x[2 * space.n_p2:]


def newton_solve(space: FemSpace, props: FluidProps, inflow: InflowSpec,
                 model: str = MODEL_PLANAR, porous: np.ndarray | None = None,
                 tol: float = 1e-11, max_iter: int = 25,
                 x0: np.ndarray | None = None,
                 continuation: bool = True) -> FlowState:
    """Solve the discrete flow model to relative residual ``tol``.

    Plain Newton from the given (or zero) initial state; if it diverges and
    ``continuation`` is enabled, restart from the Stokes solution and ramp
    the density to its target value in four steps.  Without continuation the
    divergence check is aggressive (fail fast for line-search probing).
    """
    if tol <= 0:
        raise SolverError(f"tol must be positive, got {tol}")
    dirichlet = build_dirichlet(space, inflow)
    try:
        return _newton_core(space, props, inflow, model, porous, tol, max_iter,
                            x0, dirichlet,
                            divergence_factor=1e4 if continuation else 100.0)
    except SolverError as exc:
        if not continuation:
            raise
        log.info("plain Newton failed (%s); starting density continuation", exc)
    state = None
    history: list[float] = []
    for frac in (0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0):
        ramped = dc_replace(props, rho=frac * props.rho)
        try:
            state = _newton_core(space, ramped, inflow, model, porous, tol,
                                 max_iter, None if state is None else state.x,
                                 dirichlet)
        except SolverError as exc:
            raise SolverError(
                f"continuation failed at rho fraction {frac:.2f}: {exc}",
                history=history + exc.history,
            ) from exc
        history.extend(state.residual_history)
    return dc_replace(state, residual_history=history)


def _newton_core(space, props, inflow, model, porous, tol, max_iter, x0,
                 dirichlet: DirichletSet, divergence_factor: float = 1e4) -> FlowState:
    x = np.zeros(space.ndof) if x0 is None else np.asarray(x0, dtype=float).copy()
    x = dirichlet.apply_to_state(x)

    # Convergence is judged against the problem's forcing scale.  For warm
    # starts the initial residual can already be tiny; measuring against it
    # would demand precision below the floating-point noise floor.
    bc_state = dirichlet.apply_to_state(np.zeros(space.ndof))
    ref = free_residual_norm(
        assemble_residual(space, bc_state, props, model, porous), dirichlet
    )

    history: list[float] = []
    best = np.inf
    factor = None
    for it in range(max_iter + 1):
        R = assemble_residual(space, x, props, model, porous)
        norm = free_residual_norm(R, dirichlet)
        history.append(norm)
        if not np.isfinite(norm):
            raise SolverError("Newton residual became non-finite", history=history)
        ref = max(ref, norm if it == 0 else 0.0, 1e-300)
        if norm <= tol * ref or norm <= 1e-16 * _state_scale(space, x):
            return FlowState(
                x=x, residual_norm=norm, newton_iterations=it, converged=True,
                model=model, residual_history=history, factor=factor,
                dirichlet=dirichlet,
            )
        if norm > divergence_factor * max(ref, best):
            raise SolverError(
                f"Newton diverged at iteration {it} (residual {norm:.3e})",
                history=history,
            )
        best = min(best, norm)
        if it == max_iter:
            break
        J = assemble_jacobian(space, x, props, model, porous)
        J_mod, R_mod = apply_boundary_conditions(J, R, dirichlet)
        factor = SparseFactor(J_mod)
        delta = factor.solve(-R_mod)
        # Damp overlong steps (nearly singular Jacobian); full steps resume
        # automatically near the solution, preserving quadratic convergence.
        limit = 2.0 * _state_scale(space, x)
        dnorm = float(np.linalg.norm(delta))
        if dnorm > limit:
            delta *= limit / dnorm
        x = x + delta
        x = dirichlet.apply_to_state(x)  # keep constraints exact
    raise SolverError(
        f"Newton did not converge in {max_iter} iterations "
        f"(last residual {history[-1]:.3e}, target {tol * ref:.3e})",
        history=history,
    )


def _state_scale(space: FemSpace, x: np.ndarray) -> float:
    return max(float(np.linalg.norm(x)), 1.0)


def boundary_net_flux(space: FemSpace, x: np.ndarray) -> float:
    """Net outflow integral of u . n over the whole boundary."""
    mesh = space.mesh
    geom = BoundaryGeometry(space, np.arange(mesh.boundary_edges.shape[0]))
    _, length, normal, _ = geom.geometry(space.coords)
    u = space.velocity(x)
    total = 0.0
    for e in range(geom.edges.shape[0]):
        nodes = space.tri_p2[geom.tri[e]]
        u_q = np.einsum("ac,qa->qc", u[nodes], geom.phi[e])
        total += length[e] * float(np.einsum("q,qc,c->", EDGE_QW, u_q, normal[e]))
    return total
