"""Limited-memory BFGS shape optimization with a quality-guarded line search."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ConfigurationError, SolverError
from ..fem.assembly import FluidProps, MODEL_PLANAR
from ..fem.bc import InflowSpec, build_dirichlet
from ..fem.elements import FemSpace
from ..fem.newton import FlowState, newton_solve
from ..functionals import (
    FunctionalConfig,
    check_weights,
    eval_J1,
    eval_J2,
    eval_J3,
    functional_derivatives,
)
from ..geometry.mesh import Mesh, signed_areas, triangle_angles
from .adjoint import converged_factor, shape_gradient, solve_adjoint
from .constraints import project_constraints
from .riesz import RieszMap

log = logging.getLogger(__name__)

STOP_CONVERGED = "converged"
STOP_MAX_ITERATIONS = "max_iterations"
STOP_LINE_SEARCH = "line_search_failure"
STOP_MESH_QUALITY = "mesh_quality_floor"
STOP_SOLVER_FAILURE = "state_solve_failure"
STOP_STALLED = "stalled"


@dataclass(frozen=True)
class OptimizerConfig:
    """Shape-optimizer settings (conventional defaults)."""

    memory: int = 5
    max_iterations: int = 60
    gradient_tol: float = 1e-3          # relative to the initial gradient norm
    armijo_c1: float = 1e-4
    backtrack_factor: float = 0.5
    max_backtracks: int = 14
    restarts: int = 0                   # re-runs from the stopped shape (fresh memory)
    min_mesh_angle_deg: float = 10.0
    stiffening_exponent: float = 1.0
    max_step_fraction: float = 0.5      # first-trial cap: |step| <= frac * min edge
    stall_rel_decrease: float = 1e-6    # accepted decrease below this counts as a stall
    stall_patience: int = 5

    def __post_init__(self):
        if self.memory < 1:
            raise ConfigurationError("L-BFGS memory must be >= 1")
        if self.gradient_tol <= 0 or self.armijo_c1 <= 0:
            raise ConfigurationError("tolerances must be positive")
        if not 0 < self.backtrack_factor < 1:
            raise ConfigurationError("backtrack_factor must be in (0, 1)")


@dataclass
class OptimizationTrace:
    """Per-accepted-iteration history of one optimization run."""

    weights: tuple
    j_scalar: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    step: list = field(default_factory=list)
    min_angle: list = field(default_factory=list)
    j1: list = field(default_factory=list)
    j2: list = field(default_factory=list)
    j3: list = field(default_factory=list)
    stop_reason: str = ""
    normalizers: tuple | None = None

    def append(self, j, gnorm, step, angle, costs):
        self.j_scalar.append(float(j))
        self.grad_norm.append(float(gnorm))
        self.step.append(float(step))
        self.min_angle.append(float(angle))
        self.j1.append(float(costs[0]))
        self.j2.append(float(costs[1]))
        self.j3.append(float(costs[2]))

    @property
    def iterations(self) -> int:
        return len(self.j_scalar)

    def rows(self):
        for i in range(self.iterations):
            yield (i, self.j_scalar[i], self.grad_norm[i], self.step[i],
                   self.min_angle[i], self.j1[i], self.j2[i], self.j3[i])


class ReducedProblem:
    """State solves and objective/gradient evaluation on a fixed topology."""

    def __init__(self, mesh: Mesh, props: FluidProps, inflow: InflowSpec,
                 cfg: FunctionalConfig, lam, normalizers,
                 model: str = MODEL_PLANAR, newton_tol: float = 1e-11,
                 newton_max_iter: int = 25):
        self.space = FemSpace(mesh)
        self.props = props
        self.inflow = inflow
        self.cfg = cfg
        self.lam = check_weights(lam)
        self.normalizers = None if normalizers is None else np.asarray(normalizers, float)
        self.model = model
        self.newton_tol = newton_tol
        self.newton_max_iter = newton_max_iter
        self.dirichlet = build_dirichlet(self.space, inflow)

    def solve(self, coords: np.ndarray | None = None,
              x0: np.ndarray | None = None, continuation: bool = True,
              max_iter: int | None = None) -> FlowState:
        if coords is not None:
            self.space.update_geometry(coords)
        return newton_solve(self.space, self.props, self.inflow, self.model,
                            tol=self.newton_tol,
                            max_iter=max_iter or self.newton_max_iter,
                            x0=x0, continuation=continuation)

    def costs(self, x: np.ndarray) -> tuple[float, float, float]:
        return (eval_J1(self.space, x, self.cfg),
                eval_J2(self.space, x, self.cfg),
                eval_J3(self.space, x, self.cfg, self.props.mu))

    def scalarized(self, costs) -> float:
        lam, norm = self.lam, self.normalizers
        return float(sum(lam[i] * costs[i] / norm[i] for i in range(3) if lam[i] != 0.0))

    def freeze_normalizers(self, costs) -> None:
        """Set Eq.-style normalizers from the initial-domain costs."""
        norm = np.array(costs, dtype=float)
        for i in range(3):
            if self.lam[i] != 0.0 and not norm[i] > 0.0:
                raise ConfigurationError(
                    f"initial value of J{i + 1} is {norm[i]}; cannot normalize a "
                    "functional that is already zero on the initial domain"
                )
        self.normalizers = norm

    def raw_shape_gradient(self, state: FlowState) -> np.ndarray:
        dstate, dcoords = functional_derivatives(
            self.space, state.x, self.cfg, self.lam, self.normalizers, self.props.mu
        )
        factor = converged_factor(self.space, state.x, self.props, self.model,
                                  None, self.dirichlet)
        z = solve_adjoint(factor, dstate, self.dirichlet)
        return shape_gradient(self.space, state.x, z, self.props, self.model,
                              None, dcoords)


def _lbfgs_direction(G: np.ndarray, history: list[tuple[np.ndarray, np.ndarray]]):
    """Two-loop recursion on flattened displacement-space vectors."""
    q = G.ravel().copy()
    alphas = []
    for s, y in reversed(history):
        rho = 1.0 / float(y.ravel() @ s.ravel())
        a = rho * float(s.ravel() @ q)
        q -= a * y.ravel()
        alphas.append((a, rho, s, y))
    if history:
        s, y = history[-1]
        q *= float(s.ravel() @ y.ravel()) / float(y.ravel() @ y.ravel())
    for a, rho, s, y in reversed(alphas):
        b = rho * float(y.ravel() @ q)
        q += (a - b) * s.ravel()
    return -q.reshape(G.shape)


def _min_edge_length(space: FemSpace) -> float:
    e = space.coords[space.edges[:, 1]] - space.coords[space.edges[:, 0]]
    return float(np.hypot(e[:, 0], e[:, 1]).min())


def optimize(mesh0: Mesh, props: FluidProps, inflow: InflowSpec,
             cfg: FunctionalConfig, lam, opt: OptimizerConfig | None = None,
             normalizers=None, model: str = MODEL_PLANAR,
             newton_tol: float = 1e-11) -> tuple[Mesh, FlowState, OptimizationTrace]:
    """Minimize the scalarized objective over admissible mesh deformations.

    Returns the final mesh, its flow state, and the iteration trace with a
    documented stop reason.  Every accepted step satisfies the Armijo
    condition and keeps the minimum mesh angle above the configured floor;
    non-convergence (quality floor, failing line search) returns the best
    iterate so far rather than raising.  With ``opt.restarts > 0`` the run
    is resumed from the stopped shape with fresh quasi-Newton memory, which
    also releases any quality-locked regions that have since relaxed.
    """
    opt = opt or OptimizerConfig()
    mesh, state, trace = _optimize_once(mesh0, props, inflow, cfg, lam, opt,
                                        normalizers, model, newton_tol)
    for _ in range(opt.restarts):
        if trace.stop_reason in (STOP_CONVERGED, STOP_SOLVER_FAILURE):
            break
        if trace.normalizers is None:
            break
        mesh, state, more = _optimize_once(mesh, props, inflow, cfg, lam, opt,
                                           trace.normalizers, model, newton_tol,
                                           x0=state.x)
        if more.iterations <= 1:  # no further progress possible
            trace.stop_reason = more.stop_reason
            break
        for row in more.rows():
            trace.append(row[1], row[2], row[3], row[4], (row[5], row[6], row[7]))
        trace.stop_reason = more.stop_reason
    return mesh, state, trace


def _optimize_once(mesh0: Mesh, props: FluidProps, inflow: InflowSpec,
                   cfg: FunctionalConfig, lam, opt: OptimizerConfig,
                   normalizers, model: str, newton_tol: float,
                   x0: np.ndarray | None = None) -> tuple[Mesh, FlowState, OptimizationTrace]:
    problem = ReducedProblem(mesh0, props, inflow, cfg, lam, normalizers,
                             model=model, newton_tol=newton_tol)
    trace = OptimizationTrace(weights=tuple(np.asarray(lam, float)))
    mesh = mesh0
    try:
        state = problem.solve(x0=x0)
    except SolverError as exc:
        raise SolverError(f"initial state solve failed: {exc}",
                          history=exc.history) from exc
    costs = problem.costs(state.x)
    if problem.normalizers is None:
        problem.freeze_normalizers(costs)
    trace.normalizers = tuple(problem.normalizers)
    j = problem.scalarized(costs)

    history: list[tuple[np.ndarray, np.ndarray]] = []
    prev_X = None
    prev_G = None
    gnorm0 = None
    j0 = abs(j) if j != 0.0 else 1.0
    stalls = 0
    step_cap = opt.max_step_fraction * _min_edge_length(problem.space)
    # Quality locking: nodes of elements at the angle floor move nowhere.
    # The per-iteration set tracks elements that relax back above the floor
    # (they become mobile again); the sticky set accumulates regions where
    # the line search itself failed on quality.
    locked = np.zeros(mesh.n_nodes, dtype=bool)
    stop = STOP_MAX_ITERATIONS
    for it in range(opt.max_iterations):
        angles_el = triangle_angles(mesh.nodes, mesh.triangles).min(axis=1)
        frozen = locked.copy()
        at_risk = angles_el < opt.min_mesh_angle_deg + 0.5
        if at_risk.any():
            frozen[np.unique(mesh.triangles[at_risk])] = True
        g_raw = problem.raw_shape_gradient(state)
        g = project_constraints(mesh, g_raw, frozen)
        riesz = RieszMap(mesh, opt.stiffening_exponent, extra_fixed=frozen)
        G = riesz.apply(g)
        gnorm = float(np.sqrt(max((g * G).sum(), 0.0)))
        if gnorm0 is None:
            gnorm0 = max(gnorm, 1e-300)
        angle = float(triangle_angles(mesh.nodes, mesh.triangles).min())
        trace.append(j, gnorm, 0.0 if not trace.step else trace.step[-1], angle, costs)
        if gnorm <= opt.gradient_tol * gnorm0:
            stop = STOP_CONVERGED
            break

        if prev_X is not None:
            s = mesh.nodes - prev_X
            y = G - prev_G
            sy = float(s.ravel() @ y.ravel())
            if sy > 1e-14 * np.linalg.norm(s) * np.linalg.norm(y):
                history.append((s, y))
                if len(history) > opt.memory:
                    history.pop(0)
        prev_X = mesh.nodes.copy()
        prev_G = G.copy()

        d = _lbfgs_direction(G, history)
        slope = float((g * d).sum())
        if slope >= 0.0:
            log.debug("iteration %d: L-BFGS direction not a descent; resetting", it)
            history.clear()
            d = -G
            slope = -float((g * G).sum())
        if slope >= 0.0:
            stop = STOP_CONVERGED  # zero projected gradient
            break

        d_max = float(np.abs(d).max())
        if d_max == 0.0:
            stop = STOP_CONVERGED
            break
        # Natural quasi-Newton step once curvature information exists; cap
        # relative to the initial mesh scale so progress does not crawl as
        # elements compress (the quality guard below rejects overshoots).
        alpha = min(1.0, step_cap / d_max) if not history else 1.0
        alpha = min(alpha, 20.0 * step_cap / d_max)  # absolute trial-size safety
        noise_slack = 1e-12 * (1.0 + abs(j))
        accepted = False
        quality_rejections = 0
        solver_rejections = 0
        armijo_rejections = 0
        for _ in range(opt.max_backtracks):
            trial = mesh.nodes + alpha * d
            areas = signed_areas(trial, mesh.triangles)
            if areas.min() <= 0.0 or triangle_angles(trial, mesh.triangles).min() \
                    < opt.min_mesh_angle_deg:
                quality_rejections += 1
                alpha *= opt.backtrack_factor
                continue
            problem.space.update_geometry(trial)
            try:
                # Fail fast on trial points: a diverging warm-started Newton
                # just rejects the step, no need for continuation rescue.
                trial_state = problem.solve(x0=state.x, continuation=False,
                                            max_iter=12)
            except SolverError:
                solver_rejections += 1
                problem.space.update_geometry(mesh.nodes)
                alpha *= opt.backtrack_factor
                continue
            trial_costs = problem.costs(trial_state.x)
            trial_j = problem.scalarized(trial_costs)
            if trial_j <= j + opt.armijo_c1 * alpha * slope + noise_slack:
                accepted = True
                break
            problem.space.update_geometry(mesh.nodes)
            armijo_rejections += 1
            alpha *= opt.backtrack_factor
        if not accepted:
            problem.space.update_geometry(mesh.nodes)
            if solver_rejections > max(quality_rejections, armijo_rejections):
                stop = STOP_SOLVER_FAILURE
            elif quality_rejections > armijo_rejections:
                # Lock the newly critical elements and retry with a fresh
                # direction; stop once locking makes no further progress.
                angles_el = triangle_angles(mesh.nodes, mesh.triangles).min(axis=1)
                newly = np.unique(mesh.triangles[angles_el < opt.min_mesh_angle_deg + 2.0])
                if newly.size and not locked[newly].all() and \
                        locked.sum() + newly.size <= 0.5 * mesh.n_nodes:
                    locked[newly] = True
                    history.clear()
                    prev_X = prev_G = None
                    log.debug("iteration %d: locked %d quality-critical nodes",
                              it, newly.size)
                    continue
                stop = STOP_MESH_QUALITY
            else:
                stop = STOP_LINE_SEARCH
            log.info("line search failed at iteration %d (%s)", it, stop)
            break

        decrease = j - trial_j
        mesh = replace(mesh, nodes=trial)
        problem.space.mesh = mesh
        state = trial_state
        costs = trial_costs
        j = trial_j
        trace.step[-1] = alpha
        stalls = stalls + 1 if decrease < opt.stall_rel_decrease * j0 else 0
        if stalls >= opt.stall_patience:
            stop = STOP_STALLED
            log.info("progress stalled at iteration %d", it)
            break
    trace.stop_reason = stop
    log.info("optimization finished: %s after %d iterations (J = %.6e)",
             stop, trace.iterations, j)
    return mesh, state, trace


@dataclass(frozen=True)
class GradientCheckReport:
    """Per-direction comparison of the adjoint gradient with re-solve
    central finite differences of the reduced objective."""

    directional_analytic: np.ndarray
    directional_fd: np.ndarray
    relative_errors: np.ndarray
    step: float

    @property
    def max_relative_error(self) -> float:
        return float(self.relative_errors.max())


def verify_gradient(mesh: Mesh, props: FluidProps, inflow: InflowSpec,
                    cfg: FunctionalConfig, lam, n_directions: int = 5,
                    seed: int = 0, rel_step: float = 1e-6,
                    normalizers=None, newton_tol: float = 1e-12) -> GradientCheckReport:
    """Compare the adjoint shape gradient against the re-solve oracle."""
    problem = ReducedProblem(mesh, props, inflow, cfg, lam, normalizers,
                             newton_tol=newton_tol)
    state = problem.solve()
    costs = problem.costs(state.x)
    if problem.normalizers is None:
        problem.freeze_normalizers(costs)
    g = project_constraints(mesh, problem.raw_shape_gradient(state))

    span = mesh.nodes.max(axis=0) - mesh.nodes.min(axis=0)
    eps = rel_step * float(np.hypot(*span))
    rng = np.random.default_rng(seed)
    X0 = mesh.nodes.copy()
    analytic = np.empty(n_directions)
    fd = np.empty(n_directions)
    for k in range(n_directions):
        d = project_constraints(mesh, rng.normal(size=(mesh.n_nodes, 2)))
        d /= np.abs(d).max()
        analytic[k] = float((g * d).sum())
        j_pm = []
        for sgn in (+1.0, -1.0):
            st = problem.solve(coords=X0 + sgn * eps * d, x0=state.x)
            j_pm.append(problem.scalarized(problem.costs(st.x)))
        problem.space.update_geometry(X0)
        fd[k] = (j_pm[0] - j_pm[1]) / (2.0 * eps)
    rel = np.abs(fd - analytic) / np.maximum(np.abs(fd), 1e-300)
    return GradientCheckReport(directional_analytic=analytic, directional_fd=fd,
                               relative_errors=rel, step=eps)
