# utmost/engine.py
"""ADMM outer loop with majorization-minimization inner solvers.

The placement problem
    min_H f(C(H))  s.t.  ||h_i|| = c_i,   C(H) = (H^T Phi^T R^-1 Phi H)^-1
is split through X = Phi H. The X-step is a spectral prox (after whitening by
R^{1/2}); the H-step is a row-wise projection onto spheres, closed form for a
diagonal Phi and an MM loop for the TDOA difference matrix.
"""
import logging
import math
import time
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

import numpy as np

from .config import InitKind, SolverConfig
from .errors import DimensionError, SolverAbort, ValidationError
from .mat_util import SpdFactorization, factor_spd, max_eig_psd, thin_svd
from .models import (
    Criterion,
    ModelKind,
    ModelSpec,
    NoiseCovariance,
    build_phi,
    criterion_value,
    information_operator,
    model_scale,
    random_orientation,
    scaled_objective,
    uniform_orientation,
)
from .spectral_prox import ProxInput, prox
from .trace import ConvergenceTrace

logger = logging.getLogger(__name__)

# accepted MM steps may rise by this much relative to the current value (SVD rounding)
ROUNDING_SLACK = 1e-13


class Termination(str, Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"


@dataclass
class SolverState:
    h: np.ndarray
    x: np.ndarray
    g: np.ndarray
    phi: np.ndarray
    factor: SpdFactorization
    radii: np.ndarray
    rho: float
    diagonal: bool
    free: np.ndarray
    lambda_m: float = 0.0
    k: int = 0
    degenerate_events: int = 0
    inner_scale: float = 1.0

    @property
    def r(self) -> np.ndarray:
        return self.factor.matrix


@dataclass
class SubproblemResult:
    value: np.ndarray
    objectives: List[float]
    iterations: int
    degenerate_rows: int = 0


@dataclass
class PlacementResult:
    h_opt: np.ndarray
    objective: float
    trace: ConvergenceTrace
    termination: Termination
    iterations: int
    wall_time: float
    degenerate_events: int
    baseline_objective: float
    criterion: Criterion
    model: ModelKind
    n: int
    scale: float = 1.0
    best_iteration: int = 0
    path: Optional[List[np.ndarray]] = None
    x_inner: Optional[List[List[float]]] = None
    h_inner: Optional[List[List[float]]] = None

    @property
    def objective_model_scaled(self) -> float:
        return scaled_objective(self.objective, self.criterion, self.scale, self.n)

    @property
    def improvement(self) -> float:
        """Relative gain over the uniform placement; for D, one minus the determinant ratio."""
        if not (math.isfinite(self.objective) and math.isfinite(self.baseline_objective)):
            return math.nan
        if self.criterion == Criterion.D:
            return 1.0 - math.exp(self.objective - self.baseline_objective)
        if self.baseline_objective <= 0:
            return math.nan
        return 1.0 - self.objective / self.baseline_objective


def _normalizers(phi: np.ndarray, r: np.ndarray, h_ref: np.ndarray):
    """Scales that bring R and the information of the reference orientation to unit level.

    R is divided by its geometric-mean eigenvalue; Phi by the square root of the
    geometric-mean eigenvalue of H_ref^T Phi^T R^-1 Phi H_ref under that R.
    """
    r_scale = math.exp(float(np.mean(np.log(np.linalg.eigvalsh(r)))))
    ph = phi @ h_ref
    eig = np.linalg.eigvalsh(ph.T @ np.linalg.solve(r / r_scale, ph))
    if np.all(eig > 0):
        level = math.exp(float(np.mean(np.log(eig))))
    else:
        level = float(np.mean(eig))
    if not math.isfinite(level) or level <= 0:
        level = 1.0
    return math.sqrt(level), r_scale


def _initial_orientation(spec: ModelSpec, config: SolverConfig) -> np.ndarray:
    init = config.init
    if init.kind == InitKind.UNIFORM:
        return uniform_orientation(spec.m, spec.n, spec.radii)
    if init.kind == InitKind.RANDOM:
        return random_orientation(spec.m, spec.n, init.seed, spec.radii)
    if init.h0.shape != (spec.m, spec.n):
        raise DimensionError(f"h0 must be {spec.m}x{spec.n}, got shape {init.h0.shape}", "solver.h0")
    norms = np.linalg.norm(init.h0, axis=1)
    if not np.all(np.isfinite(norms)) or np.any(norms <= 0):
        raise ValidationError("h0 rows must be finite and non-zero", "solver.h0")
    return init.h0 * (spec.radii / norms)[:, None]


def init_state(spec: ModelSpec, noise: NoiseCovariance, config: SolverConfig) -> SolverState:
    if noise.dim != spec.phi_rows:
        raise DimensionError(f"R must be {spec.phi_rows}x{spec.phi_rows} for {spec.kind.value}, got {noise.dim}")
    for row in config.fixed_rows:
        if not 0 <= row < spec.m:
            raise ValidationError(f"fixed row {row} out of range", "solver.fixed_rows")

    phi = build_phi(spec).phi
    factor = noise.factor
    if config.normalize:
        phi_scale, r_scale = _normalizers(phi, noise.r, uniform_orientation(spec.m, spec.n, spec.radii))
        phi = phi / phi_scale
        factor = factor_spd(noise.r / r_scale)

    h = _initial_orientation(spec, config)
    free = np.ones(spec.m, dtype=bool)
    free[list(config.fixed_rows)] = False
    diagonal = spec.kind != ModelKind.TDOA
    return SolverState(
        h=h,
        x=phi @ h,
        g=np.zeros((phi.shape[0], spec.n)),
        phi=phi,
        factor=factor,
        radii=spec.radii,
        rho=config.rho,
        diagonal=diagonal,
        free=free,
        lambda_m=0.0 if diagonal else max_eig_psd(phi.T @ phi),
    )


def x_rhs(state: SolverState) -> np.ndarray:
    """E = R^{1/2} (G + rho Phi H)."""
    return state.factor.sqrt @ (state.g + state.rho * state.phi @ state.h)


def x_subproblem_objective(y: np.ndarray, state: SolverState, criterion: Criterion, e: np.ndarray) -> float:
    """f((Y^T Y)^-1) + (rho/2) Tr(Y^T R Y) - Tr(E^T Y)."""
    f = criterion_value(y.T @ y, criterion)
    return f + 0.5 * state.rho * float(np.sum(y * (state.r @ y))) - float(np.sum(e * y))


def x_surrogate(y: np.ndarray, y_tau: np.ndarray, state: SolverState, criterion: Criterion, e: np.ndarray) -> float:
    """Majorizer of the X-subproblem objective built at y_tau; equal to it at y = y_tau."""
    lam = state.factor.lambda_max
    r_tilde_y_tau = state.r @ y_tau - lam * y_tau
    a = e - state.rho * r_tilde_y_tau
    f = criterion_value(y.T @ y, criterion)
    return (
        f
        + 0.5 * state.rho * lam * float(np.sum(y * y))
        - float(np.sum(a * y))
        - 0.5 * state.rho * float(np.sum(y_tau * r_tilde_y_tau))
    )


def _inner_tolerance(floor: float, state: SolverState, config: SolverConfig) -> float:
    """Relative step at which an inner MM loop stops; loosest while the outer loop is far from consensus."""
    return max(floor, config.mm_ratio * state.inner_scale)


def solve_x_subproblem(state: SolverState, config: SolverConfig, criterion: Criterion) -> SubproblemResult:
    rho = state.rho
    lam = state.factor.lambda_max
    e = x_rhs(state)
    y = state.factor.inv_sqrt @ state.x
    current = x_subproblem_objective(y, state, criterion, e)
    objectives = [current]
    iterations = 0
    tol = _inner_tolerance(config.mm_x_tol, state, config)
    for tau in range(config.mm_x_max):
        a = e - rho * (state.r @ y - lam * y)
        if not np.all(np.isfinite(a)):
            raise SolverAbort("non-finite X-step matrix", state.k, tau)
        svd = thin_svd(a)
        gammas = prox(criterion, ProxInput(svd.sigma, rho * lam))
        candidate = (svd.u * gammas) @ svd.v.T
        if not np.all(np.isfinite(candidate)):
            raise SolverAbort("non-finite X-step iterate", state.k, tau)
        value = x_subproblem_objective(candidate, state, criterion, e)
        iterations = tau + 1
        if value > current + ROUNDING_SLACK * max(1.0, abs(current)):
            logger.debug("X-step MM stalled at inner %d (%.17g > %.17g)", tau, value, current)
            break
        step = float(np.linalg.norm(candidate - y))
        y_norm = float(np.linalg.norm(y))
        y, current = candidate, value
        objectives.append(current)
        if state.factor.is_scalar or step <= tol * max(1.0, y_norm):
            break
    return SubproblemResult(value=state.factor.sqrt @ y, objectives=objectives, iterations=iterations)


def h_subproblem_objective(h: np.ndarray, state: SolverState, c: np.ndarray) -> float:
    """(rho/2) Tr(H^T Phi^T Phi H) + Tr(C^T Phi H)."""
    ph = state.phi @ h
    return 0.5 * state.rho * float(np.sum(ph * ph)) + float(np.sum(c * ph))


def _project_rows(h_prev: np.ndarray, direction: np.ndarray, state: SolverState):
    """Rows -c_i * d_i / ||d_i||; zero or fixed rows keep their previous value."""
    h = h_prev.copy()
    norms = np.linalg.norm(direction, axis=1)
    scale = max(1.0, float(np.max(norms)) if norms.size else 1.0)
    usable = state.free & (norms > 1e-15 * scale)
    h[usable] = -state.radii[usable, None] * direction[usable] / norms[usable, None]
    return h, int(np.sum(state.free & ~usable))


def solve_h_subproblem(state: SolverState, config: SolverConfig) -> SubproblemResult:
    c = state.g - state.rho * state.x
    if state.diagonal:
        # d_i > 0, so row i of Phi^T C points along row i of C
        h, degenerate = _project_rows(state.h, state.phi.T @ c, state)
        return SubproblemResult(
            value=h,
            objectives=[h_subproblem_objective(state.h, state, c), h_subproblem_objective(h, state, c)],
            iterations=1,
            degenerate_rows=degenerate,
        )

    m_mat = state.phi.T @ state.phi
    m_tilde = m_mat - state.lambda_m * np.eye(m_mat.shape[0])
    kc = state.phi.T @ c
    h = state.h
    current = h_subproblem_objective(h, state, c)
    objectives = [current]
    degenerate = 0
    iterations = 0
    tol = _inner_tolerance(config.mm_h_tol, state, config)
    for t in range(config.mm_h_max):
        b = state.rho * m_tilde @ h + kc
        if not np.all(np.isfinite(b)):
            raise SolverAbort("non-finite H-step matrix", state.k, t)
        candidate, zero_rows = _project_rows(h, b, state)
        degenerate += zero_rows
        value = h_subproblem_objective(candidate, state, c)
        iterations = t + 1
        if value > current + ROUNDING_SLACK * max(1.0, abs(current)):
            logger.debug("H-step MM stalled at inner %d (%.17g > %.17g)", t, value, current)
            break
        step = float(np.linalg.norm(candidate - h))
        h_norm = float(np.linalg.norm(h))
        h, current = candidate, value
        objectives.append(current)
        if step <= tol * max(1.0, h_norm):
            break
    return SubproblemResult(value=h, objectives=objectives, iterations=iterations, degenerate_rows=degenerate)


def update_x(state: SolverState, config: SolverConfig, criterion: Criterion) -> np.ndarray:
    return solve_x_subproblem(state, config, criterion).value


def update_h(state: SolverState, spec: ModelSpec, config: SolverConfig) -> np.ndarray:
    if state.diagonal != (spec.kind != ModelKind.TDOA):
        raise ValidationError(f"solver state does not match model {spec.kind.value}")
    return solve_h_subproblem(state, config).value


def update_g(state: SolverState, config: SolverConfig) -> np.ndarray:
    return state.g + state.rho * (state.phi @ state.h - state.x)


def _check_finite(state: SolverState) -> None:
    for name in ("x", "h", "g"):
        if not np.all(np.isfinite(getattr(state, name))):
            raise SolverAbort(f"non-finite {name.upper()} iterate", state.k)


def solve(
    spec: ModelSpec,
    noise: NoiseCovariance,
    criterion: Criterion,
    config: Optional[SolverConfig] = None,
) -> PlacementResult:
    """Optimal sensor-target orientation for one model and criterion."""
    criterion = Criterion(criterion)
    config = config or SolverConfig()
    started = time.perf_counter()

    state = init_state(spec, noise, config)
    q = information_operator(build_phi(spec), noise)

    def objective(h):
        return criterion_value(h.T @ q @ h, criterion)

    baseline = objective(uniform_orientation(spec.m, spec.n, spec.radii))
    trace = ConvergenceTrace()
    path = [state.h.copy()] if config.record_path else None
    x_inner = [] if config.record_inner else None
    h_inner = [] if config.record_inner else None
    termination = Termination.MAX_ITER
    best_h, best_value, best_k = state.h.copy(), objective(state.h), 0

    logger.info(
        f"Solving {spec.kind.value.upper()} {criterion.value}-optimal placement: "
        f"m={spec.m} n={spec.n} rho={config.rho}"
    )
    for k in range(1, config.max_outer + 1):
        state.k = k
        x_prev = state.x

        x_step = solve_x_subproblem(state, config, criterion)
        state.x = x_step.value
        h_step = solve_h_subproblem(state, config)
        state.h = h_step.value
        state.g = update_g(state, config)
        _check_finite(state)

        state.degenerate_events += h_step.degenerate_rows
        value = objective(state.h)
        if math.isnan(value):
            raise SolverAbort("non-finite objective", k)
        if math.isinf(value):
            state.degenerate_events += 1

        primal = float(np.linalg.norm(state.phi @ state.h - state.x))
        dual = state.rho * float(np.linalg.norm(state.phi.T @ (state.x - x_prev)))
        trace.add(k, value, primal, dual)
        state.inner_scale = min(1.0, primal + dual / state.rho)
        # later ties win so a converged run returns its final iterate
        if value <= best_value:
            best_h, best_value, best_k = state.h.copy(), value, k
        if path is not None:
            path.append(state.h.copy())
        if x_inner is not None:
            x_inner.append(x_step.objectives)
            h_inner.append(h_step.objectives)

        if k % config.log_every == 0:
            logger.debug(f"iter {k}: objective={value:.10g} primal={primal:.3e} dual={dual:.3e}")
        if primal <= config.tol_primal and dual <= config.tol_dual:
            termination = Termination.CONVERGED
            break

    wall_time = time.perf_counter() - started
    if termination == Termination.MAX_ITER:
        logger.warning(f"Reached max_outer={config.max_outer} before the residual tolerances")
    if state.degenerate_events:
        logger.warning(f"{state.degenerate_events} degeneracy event(s): zero-direction H rows or a singular FIM")
    logger.info(
        f"{termination.value} after {state.k} iterations: objective={best_value:.10g} at iteration {best_k} "
        f"(uniform {baseline:.10g}), {wall_time:.2f}s"
    )
    return PlacementResult(
        h_opt=best_h,
        objective=best_value,
        trace=trace,
        termination=termination,
        iterations=state.k,
        wall_time=wall_time,
        degenerate_events=state.degenerate_events,
        baseline_objective=baseline,
        criterion=criterion,
        model=spec.kind,
        n=spec.n,
        scale=model_scale(spec),
        best_iteration=best_k,
        path=path,
        x_inner=x_inner,
        h_inner=h_inner,
    )
