# utmost/mat_util.py
"""Small linear-algebra helpers shared by the solver and the simulator."""
import logging
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NotPositiveDefiniteError, ValidationError

logger = logging.getLogger(__name__)

SPD_RELATIVE_FLOOR = 1e-12
SYMMETRY_TOL = 1e-12
QUARTIC_MAX_ITER = 200


@dataclass(frozen=True, eq=False)
class SpdFactorization:
    """Factors of a symmetric positive-definite matrix R."""

    matrix: np.ndarray
    sqrt: np.ndarray
    inv_sqrt: np.ndarray
    chol: np.ndarray
    eigenvalues: np.ndarray

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def is_scalar(self) -> bool:
        """True when R is a multiple of the identity, so R - lambda_max*I vanishes."""
        return self.lambda_max - self.lambda_min <= SPD_RELATIVE_FLOOR * self.lambda_max


@dataclass(frozen=True, eq=False)
class ThinSvd:
    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray


def check_symmetric(a: np.ndarray, what: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"{what} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{what} has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if a.size and np.max(np.abs(a - a.T)) > SYMMETRY_TOL * scale:
        raise ValidationError(f"{what} not symmetric")
    return 0.5 * (a + a.T)


def factor_spd(r: np.ndarray) -> SpdFactorization:
    """Symmetric square root, its inverse and the Cholesky factor of R.

    Raises NotPositiveDefiniteError when the smallest eigenvalue is not above
    1e-12 times the largest.
    """
    r = check_symmetric(r, "noise covariance")
    w, v = np.linalg.eigh(r)
    largest = float(w[-1])
    if largest <= 0 or w[0] <= SPD_RELATIVE_FLOOR * largest:
        raise NotPositiveDefiniteError(w[0], largest)
    root = np.sqrt(w)
    sqrt = (v * root) @ v.T
    inv_sqrt = (v / root) @ v.T
    return SpdFactorization(
        matrix=r,
        sqrt=0.5 * (sqrt + sqrt.T),
        inv_sqrt=0.5 * (inv_sqrt + inv_sqrt.T),
        chol=np.linalg.cholesky(r),
        eigenvalues=w,
    )


def thin_svd(a: np.ndarray) -> ThinSvd:
    """Thin SVD with a deterministic sign convention.

    Each right singular vector is flipped so that its largest-magnitude entry
    (lowest index on ties) is positive; the matching left vector flips with it.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] < a.shape[1]:
        raise DimensionError(f"thin SVD needs a tall matrix, got shape {a.shape}")
    u, sigma, vt = np.linalg.svd(a, full_matrices=False)
    v = vt.T.copy()
    pivots = np.argmax(np.abs(v), axis=0)
    signs = np.where(v[pivots, np.arange(v.shape[1])] < 0, -1.0, 1.0)
    return ThinSvd(u=u * signs, sigma=sigma, v=v * signs)


def max_eig_psd(a: np.ndarray) -> float:
    a = check_symmetric(a)
    return float(np.linalg.eigvalsh(a)[-1])


def positive_quartic_root(rho_lambda: float, sigma: float) -> float:
    """Unique positive root of rho_lambda*g^4 - sigma*g^3 - 2 = 0.

    Newton's method from the right end of a sign-changing bracket, falling back
    to bisection whenever a step leaves the bracket.
    """
    if not rho_lambda > 0:
        raise ValidationError(f"rho*lambda must be positive, got {rho_lambda}")
    if sigma < 0:
        raise ValidationError(f"singular value must be non-negative, got {sigma}")

    def poly(g):
        return g ** 3 * (rho_lambda * g - sigma) - 2.0

    base = (2.0 / rho_lambda) ** 0.25
    lo = min(1.0, base)
    hi = max(1.0, sigma / rho_lambda + base)
    g = hi
    for _ in range(QUARTIC_MAX_ITER):
        p = poly(g)
        if abs(p) <= 1e-12 * max(1.0, sigma * g ** 3):
            return g
        if p > 0:
            hi = g
        else:
            lo = g
        slope = g ** 2 * (4.0 * rho_lambda * g - 3.0 * sigma)
        step = g - p / slope if slope > 0 else hi + 1.0
        g = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= 4.0 * np.finfo(float).eps * hi:
            break
    logger.debug("quartic root stopped on bracket width: rho_lambda=%g sigma=%g", rho_lambda, sigma)
    return g


def sample_correlated_noise(chol: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One draw of N(0, L L^T) given the lower Cholesky factor L."""
    return chol @ rng.standard_normal(chol.shape[0])
