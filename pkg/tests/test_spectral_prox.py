import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize_scalar

from utmost.errors import ValidationError
from utmost.mat_util import positive_quartic_root
from utmost.models import Criterion
from utmost.spectral_prox import (
    ProxInput,
    epigraph_inner,
    epigraph_level_value,
    prox,
    prox_a,
    prox_d,
    prox_e,
    solve_epigraph,
    surrogate_value,
)

SEEDED = settings(max_examples=50, derandomize=True, deadline=None)

sigma_values = st.floats(0.0, 20.0)
rho_lambdas = st.floats(0.05, 10.0)
sigma_lists = st.lists(sigma_values, min_size=1, max_size=3).map(lambda s: sorted(s, reverse=True))


def scalar_argmin(f, upper):
    return minimize_scalar(f, bounds=(1e-6, upper), method="bounded", options={"xatol": 1e-12}).x


def phi_a(g, sigma, rho_lambda):
    return g ** -2 + 0.5 * rho_lambda * g * g - sigma * g


def phi_d(g, sigma, rho_lambda):
    return -2.0 * math.log(g) + 0.5 * rho_lambda * g * g - sigma * g


def test_prox_a_examples():
    assert np.allclose(prox_a(ProxInput([0.0, 0.0, 0.0], 2.0)), 1.0)
    assert prox_a(ProxInput([1.0], 1.0))[0] == pytest.approx(1.5437, abs=1e-4)
    assert np.allclose(prox_a(ProxInput([10.0, 1.0], 1.0)), [10.0020, 1.5437], atol=1e-4)


def test_prox_d_examples():
    assert prox_d(ProxInput([0.0], 2.0))[0] == pytest.approx(1.0)
    assert prox_d(ProxInput([2.0], 1.0))[0] == pytest.approx(1.0 + math.sqrt(3.0))
    sigmas = np.array([5.0, 3.0, 1.0])
    gammas = prox_d(ProxInput(sigmas, 0.5))
    assert np.all(np.abs(0.5 * gammas - sigmas - 2.0 / gammas) <= 1e-12 * np.maximum(1.0, sigmas))


@SEEDED
@given(sigma_values, rho_lambdas)
def test_prox_a_matches_numerical_minimizer(sigma, rho_lambda):
    got = prox_a(ProxInput([sigma], rho_lambda))[0]
    want = scalar_argmin(lambda g: phi_a(g, sigma, rho_lambda), upper=sigma / rho_lambda + 10.0)
    assert got == pytest.approx(want, rel=1e-6)
    assert phi_a(got, sigma, rho_lambda) <= phi_a(want, sigma, rho_lambda) + 1e-12 * max(1.0, abs(phi_a(want, sigma, rho_lambda)))


@SEEDED
@given(sigma_values, rho_lambdas)
def test_prox_d_matches_numerical_minimizer(sigma, rho_lambda):
    got = prox_d(ProxInput([sigma], rho_lambda))[0]
    want = scalar_argmin(lambda g: phi_d(g, sigma, rho_lambda), upper=sigma / rho_lambda + 10.0)
    assert got == pytest.approx(want, rel=1e-6)
    assert abs(rho_lambda * got - sigma - 2.0 / got) <= 1e-12 * max(1.0, sigma, rho_lambda * got)


@SEEDED
@given(sigma_lists, rho_lambdas)
def test_prox_e_not_worse_than_dense_search(sigmas, rho_lambda):
    inp = ProxInput(sigmas, rho_lambda)
    ours = surrogate_value(prox_e(inp), inp, Criterion.E)
    # every candidate lifts each gamma to at least the floor b; the optimum lies in this family
    unconstrained = np.asarray(sigmas) / rho_lambda
    floors = np.geomspace(1e-3, 1e2, 20001)
    candidates = np.maximum(unconstrained[None, :], floors[:, None])
    values = (
        np.max(candidates ** -2.0, axis=1)
        + 0.5 * rho_lambda * np.sum(candidates ** 2, axis=1)
        - candidates @ np.asarray(sigmas)
    )
    assert ours <= values.min() + 1e-9 * max(1.0, abs(values.min()))


@settings(max_examples=100, derandomize=True, deadline=None)
@given(sigma_lists, rho_lambdas, st.sampled_from(list(Criterion)))
def test_prox_beats_simple_feasible_points(sigmas, rho_lambda, criterion):
    inp = ProxInput(sigmas, rho_lambda)
    gammas = prox(criterion, inp)
    assert np.all(gammas > 0)
    ours = surrogate_value(gammas, inp, criterion)
    slack = 1e-9 * max(1.0, abs(ours))
    assert ours <= surrogate_value(np.ones_like(gammas), inp, criterion) + slack
    assert ours <= surrogate_value(inp.sigmas / rho_lambda + 1.0, inp, criterion) + slack


def test_prox_a_and_d_are_monotone_in_sigma():
    inp = ProxInput([4.0, 2.0, 1.0, 0.0], 1.0)
    for gammas in (prox_a(inp), prox_d(inp)):
        assert np.all(gammas > 0)
        assert np.all(np.diff(gammas) <= 0)


def test_prox_e_examples():
    assert prox_e(ProxInput([0.0], 2.0))[0] == pytest.approx(1.0, abs=1e-6)
    assert np.allclose(prox_e(ProxInput([0.0, 0.0], 2.0)), 1.0, atol=1e-6)


def test_prox_e_pins_small_singular_values():
    inp = ProxInput([10.0, 1.0], 1.0)
    gammas = prox_e(inp)
    assert gammas[0] == pytest.approx(10.0, abs=1e-12)
    assert gammas[1] == pytest.approx(positive_quartic_root(1.0, 1.0), abs=1e-6)


def test_prox_e_matches_three_variable_grid():
    inp = ProxInput([3.0, 0.0], 1.0)
    sol = solve_epigraph(inp)

    theta1, theta2, t = np.meshgrid(
        np.linspace(8.0, 10.0, 101), np.linspace(1.0, 2.0, 101), np.linspace(0.5, 1.0, 101), indexing="ij"
    )
    values = t + 0.5 * (theta1 + theta2) - 3.0 * np.sqrt(theta1)
    feasible = (1.0 / theta1 <= t) & (1.0 / theta2 <= t)
    values = np.where(feasible, values, np.inf)
    best = np.unravel_index(np.argmin(values), values.shape)

    assert sol.objective <= values[best] + 1e-12
    assert sol.objective >= values[best] - 1e-2
    assert sol.thetas[0] == pytest.approx(theta1[best], abs=0.04)
    assert sol.thetas[1] == pytest.approx(theta2[best], abs=0.02)
    assert sol.t == pytest.approx(t[best], abs=0.01)
    assert np.allclose(prox_e(inp), [3.0, 2.0 ** 0.25], atol=1e-6)


@pytest.mark.parametrize("t, sigma, rho_lambda, theta", [
    (1.0, 0.0, 1.0, 1.0),
    (0.1, 4.0, 1.0, 16.0),
    (0.01, 1.0, 1.0, 100.0),
])
def test_epigraph_inner_examples(t, sigma, rho_lambda, theta):
    assert epigraph_inner(t, sigma, rho_lambda) == pytest.approx(theta)


@pytest.mark.parametrize("args", [(0.0, 1.0, 1.0), (1.0, -1.0, 1.0), (1.0, 1.0, 0.0)])
def test_epigraph_inner_rejects_invalid(args):
    with pytest.raises(ValidationError):
        epigraph_inner(*args)


@settings(max_examples=50, derandomize=True)
@given(sigma_lists, rho_lambdas)
def test_epigraph_level_value_is_convex(sigmas, rho_lambda):
    levels = np.geomspace(1e-3, 1e3, 41)
    values = [epigraph_level_value(t, sigmas, rho_lambda) for t in levels]
    for (t0, v0), (t1, v1) in zip(zip(levels, values), zip(levels[2:], values[2:])):
        mid = 0.5 * (t0 + t1)
        assert epigraph_level_value(mid, sigmas, rho_lambda) <= 0.5 * (v0 + v1) + 1e-9 * max(1.0, abs(v0), abs(v1))


def test_epigraph_solution_is_consistent():
    inp = ProxInput([2.0, 0.5], 2.0)
    sol = solve_epigraph(inp)
    assert sol.t > 0
    assert np.all(1.0 / sol.thetas <= sol.t * (1 + 1e-9))
    assert np.allclose(sol.thetas, [epigraph_inner(sol.t, s, inp.rho_lambda) for s in inp.sigmas])
    assert sol.objective == pytest.approx(epigraph_level_value(sol.t, inp.sigmas, inp.rho_lambda), rel=1e-12)


def test_epigraph_level_value_rejects_non_positive_level():
    with pytest.raises(ValidationError):
        epigraph_level_value(0.0, [1.0], 1.0)


def test_prox_dispatches_by_criterion():
    inp = ProxInput([2.0, 1.0], 1.5)
    assert np.array_equal(prox(Criterion.A, inp), prox_a(inp))
    assert np.array_equal(prox("D", inp), prox_d(inp))
    assert np.array_equal(prox(Criterion.E, inp), prox_e(inp))


@pytest.mark.parametrize("sigmas, rho_lambda", [
    ([], 1.0),
    ([1.0, 2.0], 1.0),
    ([1.0, -0.5], 1.0),
    ([1.0, np.nan], 1.0),
    ([1.0], 0.0),
    ([1.0], math.inf),
])
def test_prox_input_rejects_invalid(sigmas, rho_lambda):
    with pytest.raises(ValidationError):
        ProxInput(sigmas, rho_lambda)


def test_surrogate_value_is_infinite_off_domain():
    inp = ProxInput([1.0, 1.0], 1.0)
    assert surrogate_value(np.array([1.0, 0.0]), inp, Criterion.A) == math.inf
