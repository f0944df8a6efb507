# utmost/spectral_prox.py
"""Closed-form and one-dimensional proximal steps on singular values.

Each criterion's X-subproblem reduces, after an SVD, to minimizing
    f(diag(gamma)^-2) + (rho_lambda / 2) * sum(gamma^2) - sum(sigma * gamma)
over gamma > 0, one problem per criterion.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np

from .errors import ValidationError
from .mat_util import positive_quartic_root
from .models import Criterion

logger = logging.getLogger(__name__)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
SEARCH_MAX_ITER = 200
SEARCH_WIDTH = 1e-12


@dataclass(frozen=True, eq=False)
class ProxInput:
    sigmas: np.ndarray
    rho_lambda: float

    def __post_init__(self):
        sigmas = np.asarray(self.sigmas, dtype=float).reshape(-1)
        if sigmas.size == 0:
            raise ValidationError("need at least one singular value")
        if not np.all(np.isfinite(sigmas)) or np.any(sigmas < 0):
            raise ValidationError("singular values must be finite and non-negative")
        if np.any(np.diff(sigmas) > 0):
            raise ValidationError("singular values must be sorted in descending order")
        if not (math.isfinite(self.rho_lambda) and self.rho_lambda > 0):
            raise ValidationError(f"rho*lambda must be positive, got {self.rho_lambda}")
        object.__setattr__(self, "sigmas", sigmas)


@dataclass(frozen=True, eq=False)
class EpigraphSolution:
    thetas: np.ndarray
    t: float
    objective: float


def prox_a(inp: ProxInput) -> np.ndarray:
    return np.array([positive_quartic_root(inp.rho_lambda, s) for s in inp.sigmas])


def prox_d(inp: ProxInput) -> np.ndarray:
    rl = inp.rho_lambda
    return (inp.sigmas + np.sqrt(inp.sigmas ** 2 + 8.0 * rl)) / (2.0 * rl)


def _clamp(t: float, sigma: float, rho_lambda: float) -> float:
    return max((sigma / rho_lambda) ** 2, 1.0 / t)


def epigraph_inner(t: float, sigma: float, rho_lambda: float) -> float:
    """Minimizer over theta >= 1/t of (rho_lambda/2) theta - sigma sqrt(theta)."""
    if not t > 0:
        raise ValidationError(f"epigraph level must be positive, got {t}")
    if not sigma >= 0:
        raise ValidationError(f"singular value must be non-negative, got {sigma}")
    if not rho_lambda > 0:
        raise ValidationError(f"rho*lambda must be positive, got {rho_lambda}")
    return _clamp(t, sigma, rho_lambda)


def epigraph_level_value(t: float, sigmas, rho_lambda: float) -> float:
    """Epigraph objective at level t once every theta sits at its clamped minimizer."""
    if not t > 0:
        raise ValidationError(f"epigraph level must be positive, got {t}")
    total = t
    for s in sigmas:
        theta = _clamp(t, s, rho_lambda)
        total += 0.5 * rho_lambda * theta - s * math.sqrt(theta)
    return total


def _bracket(sigmas, rho_lambda: float):
    n = len(sigmas)
    total = float(sum(sigmas))
    at_one = epigraph_level_value(1.0, sigmas, rho_lambda)
    upper = at_one + sum(s * s for s in sigmas) / (2.0 * rho_lambda)
    # all thetas pinned at 1/t below 1/s_star**2
    s_star = (total + math.sqrt(total ** 2 + 2.0 * n * rho_lambda * max(at_one, 0.0))) / (n * rho_lambda)
    lower = 1.0 / s_star ** 2
    largest = max(sigmas) / rho_lambda
    if largest > 0:
        lower = min(lower, 1.0 / largest ** 2)
    return 0.5 * lower, 2.0 * upper


def solve_epigraph(inp: ProxInput) -> EpigraphSolution:
    """Minimize t + sum((rho_lambda/2) theta - sigma sqrt(theta)) s.t. theta_i >= 1/t.

    The value after eliminating theta is convex in t; golden-section search runs
    over log t inside a bracket that provably holds the minimizer.
    """
    sigmas = [float(s) for s in inp.sigmas]
    rl = float(inp.rho_lambda)
    lo, hi = (math.log(v) for v in _bracket(sigmas, rl))

    def value(u):
        return epigraph_level_value(math.exp(u), sigmas, rl)

    a = hi - GOLDEN * (hi - lo)
    b = lo + GOLDEN * (hi - lo)
    fa, fb = value(a), value(b)
    for _ in range(SEARCH_MAX_ITER):
        if hi - lo <= SEARCH_WIDTH:
            break
        if fa <= fb:
            hi, b, fb = b, a, fa
            a = hi - GOLDEN * (hi - lo)
            fa = value(a)
        else:
            lo, a, fa = a, b, fb
            b = lo + GOLDEN * (hi - lo)
            fb = value(b)
    u = a if fa <= fb else b
    t = math.exp(u)
    thetas = np.maximum((inp.sigmas / rl) ** 2, 1.0 / t)
    return EpigraphSolution(thetas=thetas, t=t, objective=min(fa, fb))


def prox_e(inp: ProxInput) -> np.ndarray:
    return np.sqrt(solve_epigraph(inp).thetas)


def surrogate_value(gammas: np.ndarray, inp: ProxInput, criterion: Criterion) -> float:
    """Separable objective the prox minimizes, evaluated at gammas."""
    gammas = np.asarray(gammas, dtype=float)
    if np.any(gammas <= 0):
        return math.inf
    criterion = Criterion(criterion)
    if criterion == Criterion.A:
        f = float(np.sum(gammas ** -2.0))
    elif criterion == Criterion.D:
        f = float(-2.0 * np.sum(np.log(gammas)))
    else:
        f = float(np.max(gammas ** -2.0))
    return f + 0.5 * inp.rho_lambda * float(np.sum(gammas ** 2)) - float(np.dot(inp.sigmas, gammas))


PROX: Dict[Criterion, Callable[[ProxInput], np.ndarray]] = {
    Criterion.A: prox_a,
    Criterion.D: prox_d,
    Criterion.E: prox_e,
}


def prox(criterion: Criterion, inp: ProxInput) -> np.ndarray:
    return PROX[Criterion(criterion)](inp)
