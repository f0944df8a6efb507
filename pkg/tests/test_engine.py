import logging
import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.optimize import minimize

from utmost.config import InitSpec, SolverConfig
from utmost.engine import (
    Termination,
    h_subproblem_objective,
    init_state,
    solve,
    solve_h_subproblem,
    solve_x_subproblem,
    update_g,
    update_h,
    x_rhs,
    x_subproblem_objective,
    x_surrogate,
)
from utmost.errors import DimensionError, SolverAbort, ValidationError
from utmost.landscape import path_azimuths
from utmost.models import (
    Criterion,
    ModelKind,
    ModelSpec,
    NoiseCovariance,
    build_phi,
    criterion_value,
    information_operator,
    theoretical_optimum,
    uniform_orientation,
)
from utmost.simulation.scenarios import (
    FIXED_PLANAR_ROW,
    aoa_case,
    correlated_toa_case,
    planar_fixed_sensor_case,
    rss_case,
    tdoa_case,
)
from utmost.trace import is_non_increasing


def toa(m, n=3, **kwargs):
    return ModelSpec(ModelKind.TOA, m=m, n=n, **kwargs)


CLOSED_FORM_TOLERANCE = {Criterion.A: 1e-3, Criterion.D: 1e-3, Criterion.E: 5e-3}


@pytest.mark.parametrize("criterion", list(Criterion))
@pytest.mark.parametrize("m", [5, 10])
def test_toa_reaches_closed_form_optimum(m, criterion):
    config = SolverConfig(init=InitSpec.random(7))
    result = solve(toa(m), NoiseCovariance.identity(m), criterion, config)
    assert result.termination == Termination.CONVERGED
    assert result.objective == pytest.approx(theoretical_optimum(m, 1.0, criterion), abs=CLOSED_FORM_TOLERANCE[criterion])
    assert np.allclose(np.linalg.norm(result.h_opt, axis=1), 1.0)


def test_planar_three_sensors_form_tight_frame():
    config = SolverConfig(init=InitSpec.random(7))
    result = solve(toa(3, n=2), NoiseCovariance.identity(3), Criterion.A, config)
    assert result.termination == Termination.CONVERGED
    assert result.objective == pytest.approx(4 / 3, abs=1e-4)
    assert np.allclose(result.h_opt.T @ result.h_opt, 1.5 * np.eye(2), atol=1e-3)
    assert result.baseline_objective == pytest.approx(1.5)
    assert result.improvement > 0


def test_rows_keep_prescribed_norms(short_config):
    radii = np.array([1.0, 2.0, 1.0, 0.5, 1.5])
    result = solve(toa(5, row_norms=radii), NoiseCovariance.identity(5), Criterion.D, short_config)
    assert np.allclose(np.linalg.norm(result.h_opt, axis=1), radii, rtol=0, atol=1e-12)


def test_scalar_noise_level_only_rescales_the_objective(short_config):
    base = solve(toa(7), NoiseCovariance.identity(7), Criterion.A, short_config)
    scaled = solve(toa(7), NoiseCovariance.identity(7, upsilon=2.0), Criterion.A, short_config)
    assert scaled.objective == pytest.approx(4.0 * base.objective, rel=1e-6)


def test_solve_is_deterministic(correlated_noise, short_config):
    spec = toa(6)
    first = solve(spec, correlated_noise, Criterion.E, short_config)
    second = solve(spec, correlated_noise, Criterion.E, short_config)
    assert np.array_equal(first.h_opt, second.h_opt)
    assert np.array_equal(first.trace.objectives(), second.trace.objectives())


def test_trace_has_one_row_per_iteration(correlated_noise, short_config):
    result = solve(toa(6), correlated_noise, Criterion.A, short_config)
    frame = result.trace.to_frame()
    assert list(frame.columns) == ["iter", "objective", "primal_residual", "dual_residual"]
    assert len(frame) == result.iterations
    assert frame["iter"].tolist() == list(range(1, result.iterations + 1))
    if result.termination == Termination.CONVERGED:
        assert frame["primal_residual"].iloc[-1] <= short_config.tol_primal


def test_scalar_noise_x_step_is_exact(rng):
    spec = toa(4)
    config = SolverConfig()
    state = init_state(spec, NoiseCovariance.identity(4), config)
    state.g = rng.standard_normal(state.g.shape)
    result = solve_x_subproblem(state, config, Criterion.A)
    assert result.iterations == 1
    e = x_rhs(state)
    ours = x_subproblem_objective(result.value, state, Criterion.A, e)
    for _ in range(3):
        start = rng.standard_normal(12)
        res = minimize(
            lambda v: x_subproblem_objective(v.reshape(4, 3), state, Criterion.A, e), start, method="BFGS"
        )
        assert ours <= res.fun + 1e-8


def test_x_surrogate_is_tight_and_majorizes():
    config = SolverConfig()
    for seed in range(100):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((6, 6))
        state = init_state(toa(6), NoiseCovariance(a @ a.T + 0.5 * np.eye(6)), config)
        state.g = rng.standard_normal(state.g.shape)
        e = x_rhs(state)
        y_tau = rng.standard_normal((6, 3))
        for criterion in Criterion:
            at_tau = x_subproblem_objective(y_tau, state, criterion, e)
            assert x_surrogate(y_tau, y_tau, state, criterion, e) == pytest.approx(at_tau, rel=1e-10)
            for _ in range(50):
                y = y_tau + rng.standard_normal((6, 3))
                exact = x_subproblem_objective(y, state, criterion, e)
                gap = x_surrogate(y, y_tau, state, criterion, e) - exact
                assert gap >= -1e-9 * max(1.0, abs(exact))


@pytest.mark.parametrize("case", [correlated_toa_case, tdoa_case, rss_case])
def test_inner_loops_never_increase(case):
    spec, noise = case()
    config = SolverConfig(max_outer=40, record_inner=True)
    result = solve(spec, noise, Criterion.A, config)
    assert len(result.x_inner) == result.iterations
    for objectives in result.x_inner + result.h_inner:
        assert is_non_increasing(objectives)


def test_diagonal_h_step_projects_rows(rng):
    spec = ModelSpec(ModelKind.RSS, m=4, n=3, ranges=[1.0, 2.0, 3.0, 4.0])
    config = SolverConfig(normalize=False)
    state = init_state(spec, NoiseCovariance.identity(4), config)
    state.x = rng.standard_normal(state.x.shape)
    state.g = rng.standard_normal(state.g.shape)
    result = solve_h_subproblem(state, config)
    direction = state.phi.T @ (state.g - state.rho * state.x)
    expected = -direction / np.linalg.norm(direction, axis=1, keepdims=True)
    assert np.allclose(result.value, expected)
    assert result.objectives[1] <= result.objectives[0]
    assert np.array_equal(update_h(state, spec, config), result.value)


def test_tdoa_h_step_matches_grid_search(rng):
    spec = ModelSpec(ModelKind.TDOA, m=3, n=2)
    config = SolverConfig(rho=0.05, normalize=False, fixed_rows=(0,), mm_h_max=2000, mm_ratio=0.0)
    state = init_state(spec, NoiseCovariance.identity(2), config)
    state.x = rng.standard_normal(state.x.shape)
    state.g = rng.standard_normal(state.g.shape)
    result = solve_h_subproblem(state, config)
    assert np.array_equal(result.value[0], state.h[0])
    assert np.allclose(np.linalg.norm(result.value, axis=1), 1.0)
    assert is_non_increasing(result.objectives)

    c = state.g - state.rho * state.x
    ours = h_subproblem_objective(result.value, state, c)
    angles = np.linspace(-np.pi, np.pi, 3601)
    circle = np.column_stack([np.cos(angles), np.sin(angles)])
    d = circle - state.h[0]
    sq = np.sum(d ** 2, axis=1)
    grid = (
        0.5 * state.rho * (sq[:, None] + sq[None, :])
        + (d @ c[0])[:, None]
        + (d @ c[1])[None, :]
    )
    assert ours <= grid.min() + 1e-3


def test_fixed_row_never_moves():
    spec, noise, config = planar_fixed_sensor_case()
    result = solve(spec, noise, Criterion.A, config)
    assert np.allclose(result.h_opt[2], FIXED_PLANAR_ROW, rtol=0, atol=1e-15)
    assert all(np.array_equal(h[2], result.h_opt[2]) for h in result.path)
    assert len(result.path) == result.iterations + 1
    assert result.objective == pytest.approx(4 / 3, abs=1e-4)
    assert path_azimuths(result.path, (0, 1)).shape == (result.iterations + 1, 2)


def test_update_g_adds_scaled_residual(rng):
    config = SolverConfig(rho=2.0)
    state = init_state(toa(4), NoiseCovariance.identity(4), config)
    state.x = rng.standard_normal(state.x.shape)
    state.g = rng.standard_normal(state.g.shape)
    expected = state.g + 2.0 * (state.phi @ state.h - state.x)
    assert np.allclose(update_g(state, config), expected)


def test_non_finite_prox_aborts(monkeypatch):
    monkeypatch.setattr("utmost.engine.prox", lambda criterion, inp: np.full(inp.sigmas.shape, np.nan))
    with pytest.raises(SolverAbort) as info:
        solve(toa(4), NoiseCovariance.identity(4), Criterion.A)
    assert info.value.iteration == 1
    assert info.value.inner == 0


def test_noise_dimension_must_match_phi_rows():
    with pytest.raises(DimensionError):
        solve(toa(4), NoiseCovariance.identity(3), Criterion.A)
    with pytest.raises(DimensionError):
        solve(ModelSpec(ModelKind.TDOA, m=4, n=3), NoiseCovariance.identity(4), Criterion.A)


def test_fixed_row_out_of_range():
    with pytest.raises(ValidationError, match="fixed row"):
        solve(toa(4), NoiseCovariance.identity(4), Criterion.A, SolverConfig(fixed_rows=(4,)))


def test_explicit_init_rejects_zero_row():
    h0 = np.eye(4, 3)
    h0[3] = 0.0
    with pytest.raises(ValidationError) as info:
        solve(toa(4), NoiseCovariance.identity(4), Criterion.A, SolverConfig(init=InitSpec.explicit(h0)))
    assert info.value.path == "solver.h0"


def test_improvement_definitions(short_config):
    result = solve(toa(4), NoiseCovariance.identity(4), Criterion.A, short_config)
    assert replace(result, objective=1.0, baseline_objective=4.0).improvement == pytest.approx(0.75)
    d = replace(result, criterion=Criterion.D, objective=math.log(0.5), baseline_objective=0.0)
    assert d.improvement == pytest.approx(0.5)
    assert math.isnan(replace(result, objective=math.inf).improvement)
    assert replace(result, objective=1.0, baseline_objective=1.0).objective_model_scaled == pytest.approx(0.25)


def test_returns_best_iterate(correlated_noise, short_config):
    spec = toa(6)
    result = solve(spec, correlated_noise, Criterion.D, short_config)
    values = [result.baseline_objective] + list(result.trace.objectives())
    assert result.objective == min(values)
    if result.best_iteration:
        assert result.trace.objectives()[result.best_iteration - 1] == result.objective
    q = information_operator(build_phi(spec), correlated_noise)
    assert criterion_value(result.h_opt.T @ q @ result.h_opt, Criterion.D) == pytest.approx(result.objective, rel=1e-12)


def test_iteration_cap_is_reported(correlated_noise, caplog):
    with caplog.at_level(logging.WARNING, logger="utmost.engine"):
        result = solve(toa(6), correlated_noise, Criterion.A, SolverConfig(max_outer=3))
    assert result.termination == Termination.MAX_ITER
    assert result.iterations == 3
    assert "max_outer=3" in caplog.text


def test_normalization_scales_uniform_information_to_unit_level(correlated_noise):
    spec = toa(6)
    state = init_state(spec, correlated_noise, SolverConfig())
    h = uniform_orientation(6, 3)
    ph = state.phi @ h
    eig = np.linalg.eigvalsh(ph.T @ np.linalg.solve(state.r, ph))
    assert math.exp(np.mean(np.log(eig))) == pytest.approx(1.0, rel=1e-10)
    assert math.exp(np.mean(np.log(np.linalg.eigvalsh(state.r)))) == pytest.approx(1.0, rel=1e-10)


@pytest.mark.slow
@pytest.mark.parametrize("case", [correlated_toa_case, tdoa_case, rss_case, aoa_case])
@pytest.mark.parametrize("criterion", list(Criterion))
def test_optimal_placement_beats_uniform(case, criterion):
    spec, noise = case()
    result = solve(spec, noise, criterion)
    assert math.isfinite(result.objective)
    assert result.termination == Termination.CONVERGED
    assert result.objective < result.baseline_objective
    assert result.wall_time < 10.0
