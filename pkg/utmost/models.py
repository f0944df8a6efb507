# utmost/models.py
"""Measurement models, the unified Fisher information and the optimality criteria."""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .errors import DimensionError, ValidationError
from .mat_util import SpdFactorization, check_symmetric, factor_spd

logger = logging.getLogger(__name__)

DEGENERATE_EIG_RATIO = 1e-14
ROW_NORM_TOL = 1e-9


class ModelKind(str, Enum):
    TOA = "toa"
    TDOA = "tdoa"
    RSS = "rss"
    AOA = "aoa"


class Criterion(str, Enum):
    A = "A"
    D = "D"
    E = "E"


@dataclass(frozen=True, eq=False)
class ModelSpec:
    kind: ModelKind
    m: int
    n: int
    reference_index: Optional[int] = None
    ranges: Optional[np.ndarray] = None
    path_loss: float = 2.0
    row_norms: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if self.n not in (2, 3):
            raise ValidationError(f"dimension n must be 2 or 3, got {self.n}", "n")
        if self.m < 1:
            raise ValidationError(f"sensor count m must be positive, got {self.m}", "m")
        if self.kind == ModelKind.TDOA:
            if self.m < self.n + 1:
                raise ValidationError(f"TDOA needs m >= n + 1, got m={self.m}", "m")
            ref = 0 if self.reference_index is None else int(self.reference_index)
            if not 0 <= ref < self.m:
                raise ValidationError(f"reference index {ref} out of range", "reference_index")
            object.__setattr__(self, "reference_index", ref)
        else:
            if self.m < self.n:
                raise ValidationError(f"need m >= n sensors, got m={self.m}", "m")
            if self.reference_index is not None:
                raise ValidationError("reference index applies to TDOA only", "reference_index")

        if self.kind in (ModelKind.RSS, ModelKind.AOA):
            if self.ranges is None:
                raise ValidationError(f"{self.kind.value.upper()} needs target-sensor ranges", "ranges")
            ranges = np.array(self.ranges, dtype=float).reshape(-1)
            if ranges.shape != (self.m,):
                raise DimensionError(f"expected {self.m} ranges, got {ranges.size}", "ranges")
            if not np.all(np.isfinite(ranges)) or np.any(ranges <= 0):
                raise ValidationError("ranges must be finite and positive", "ranges")
            object.__setattr__(self, "ranges", ranges)
        elif self.ranges is not None:
            raise ValidationError("ranges apply to RSS and AOA only", "ranges")

        if self.kind == ModelKind.RSS and not (math.isfinite(self.path_loss) and self.path_loss > 0):
            raise ValidationError("path-loss exponent must be positive", "path_loss")

        if self.row_norms is not None:
            norms = np.array(self.row_norms, dtype=float).reshape(-1)
            if norms.shape != (self.m,):
                raise DimensionError(f"expected {self.m} row norms, got {norms.size}", "row_norms")
            if not np.all(np.isfinite(norms)) or np.any(norms <= 0):
                raise ValidationError("row norms must be finite and positive", "row_norms")
            object.__setattr__(self, "row_norms", norms)

    @property
    def radii(self) -> np.ndarray:
        return np.ones(self.m) if self.row_norms is None else self.row_norms

    @property
    def phi_rows(self) -> int:
        return self.m - 1 if self.kind == ModelKind.TDOA else self.m


@dataclass(frozen=True, eq=False)
class MappingMatrix:
    """The matrix Phi that maps orientations to measurement sensitivities."""

    phi: np.ndarray
    kind: ModelKind

    @property
    def is_diagonal(self) -> bool:
        return self.kind != ModelKind.TDOA

    @property
    def shape(self):
        return self.phi.shape


@dataclass(frozen=True, eq=False)
class NoiseCovariance:
    r: np.ndarray
    factor: SpdFactorization = field(init=False, repr=False)

    def __post_init__(self):
        r = check_symmetric(self.r, "noise covariance")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "factor", factor_spd(r))

    @property
    def dim(self) -> int:
        return self.r.shape[0]

    @classmethod
    def identity(cls, dim: int, upsilon: float = 1.0) -> "NoiseCovariance":
        return cls(upsilon ** 2 * np.eye(dim))


def difference_matrix(m: int, reference_index: int = 0) -> np.ndarray:
    """(m-1) x m matrix with -1 in the reference column and one +1 per row."""
    others = [i for i in range(m) if i != reference_index]
    k = np.zeros((m - 1, m))
    k[np.arange(m - 1), others] = 1.0
    k[:, reference_index] = -1.0
    return k


def build_phi(spec: ModelSpec) -> MappingMatrix:
    if spec.kind == ModelKind.TOA:
        phi = np.eye(spec.m)
    elif spec.kind == ModelKind.TDOA:
        phi = difference_matrix(spec.m, spec.reference_index)
    else:
        phi = np.diag(1.0 / spec.ranges)
    return MappingMatrix(phi=phi, kind=spec.kind)


def tdoa_covariance(range_noise: np.ndarray, reference_index: int = 0) -> np.ndarray:
    """Covariance K Sigma K^T of the differenced measurements for per-sensor noise Sigma."""
    sigma = check_symmetric(range_noise, "range noise covariance")
    k = difference_matrix(sigma.shape[0], reference_index)
    return k @ sigma @ k.T


def check_orientation(h: np.ndarray, radii: np.ndarray) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    radii = np.asarray(radii, dtype=float)
    if h.ndim != 2 or h.shape[0] != radii.shape[0]:
        raise DimensionError(f"orientation matrix must have {radii.shape[0]} rows, got shape {h.shape}")
    norms = np.linalg.norm(h, axis=1)
    if not np.all(np.abs(norms - radii) <= ROW_NORM_TOL * np.maximum(1.0, radii)):
        raise ValidationError("orientation rows must have the prescribed norms")
    return h


def fim(h: np.ndarray, phi: MappingMatrix, noise: NoiseCovariance) -> np.ndarray:
    """F = H^T Phi^T R^-1 Phi H, symmetrized."""
    h = np.asarray(h, dtype=float)
    if phi.phi.shape[1] != h.shape[0]:
        raise DimensionError(f"Phi has {phi.phi.shape[1]} columns but H has {h.shape[0]} rows")
    if noise.dim != phi.phi.shape[0]:
        raise DimensionError(f"R is {noise.dim}x{noise.dim} but Phi has {phi.phi.shape[0]} rows")
    ph = phi.phi @ h
    f = ph.T @ np.linalg.solve(noise.r, ph)
    return 0.5 * (f + f.T)


def information_operator(phi: MappingMatrix, noise: NoiseCovariance) -> np.ndarray:
    """Q = Phi^T R^-1 Phi, so that F(H) = H^T Q H."""
    if noise.dim != phi.phi.shape[0]:
        raise DimensionError(f"R is {noise.dim}x{noise.dim} but Phi has {phi.phi.shape[0]} rows")
    q = phi.phi.T @ np.linalg.solve(noise.r, phi.phi)
    return 0.5 * (q + q.T)


def is_degenerate(eigenvalues: np.ndarray) -> bool:
    largest = float(eigenvalues[-1])
    return largest <= 0 or float(eigenvalues[0]) <= DEGENERATE_EIG_RATIO * largest


def criterion_value(f: np.ndarray, criterion: Criterion) -> float:
    """Criterion of the CRLB C = F^-1; +inf when F is numerically singular."""
    criterion = Criterion(criterion)
    w = np.linalg.eigvalsh(0.5 * (f + f.T))
    if is_degenerate(w):
        return math.inf
    if criterion == Criterion.A:
        return float(np.sum(1.0 / w))
    if criterion == Criterion.D:
        return float(-np.sum(np.log(w)))
    return float(1.0 / w[0])


def theoretical_optimum(m: int, upsilon: float, criterion: Criterion, n: int = 3) -> float:
    """Closed-form optimum for TOA with Phi = I and R = upsilon^2 I.

    Attained when H^T H = (m/n) I, so C = (n upsilon^2 / m) I.
    """
    criterion = Criterion(criterion)
    if m < n + 1:
        raise ValidationError(f"closed form needs m >= {n + 1}, got m={m}")
    if upsilon <= 0:
        raise ValidationError(f"upsilon must be positive, got {upsilon}")
    c = n * upsilon ** 2 / m
    if criterion == Criterion.A:
        return n * c
    if criterion == Criterion.D:
        return n * math.log(c)
    return c


def model_scale(spec: ModelSpec) -> float:
    """Constant the model's true FIM carries over H^T Phi^T R^-1 Phi H, inverted."""
    if spec.kind == ModelKind.TOA:
        return 0.25
    if spec.kind == ModelKind.RSS:
        return 1.0 / spec.path_loss ** 2
    return 1.0


def scaled_objective(value: float, criterion: Criterion, scale: float, n: int) -> float:
    if not math.isfinite(value):
        return value
    if Criterion(criterion) == Criterion.D:
        return value + n * math.log(scale)
    return value * scale


def uniform_orientation(m: int, n: int, radii: Optional[np.ndarray] = None) -> np.ndarray:
    """Rows cycle through e_1..e_n, -e_1..-e_n, scaled to the row norms."""
    h = np.zeros((m, n))
    for i in range(m):
        h[i, i % n] = 1.0 if (i // n) % 2 == 0 else -1.0
    if radii is not None:
        h *= np.asarray(radii, dtype=float)[:, None]
    return h


def random_orientation(m: int, n: int, seed: int, radii: Optional[np.ndarray] = None) -> np.ndarray:
    rng = np.random.default_rng(seed)
    h = rng.standard_normal((m, n))
    norms = np.linalg.norm(h, axis=1)
    while np.any(norms == 0):
        zero = norms == 0
        h[zero] = rng.standard_normal((int(zero.sum()), n))
        norms = np.linalg.norm(h, axis=1)
    h /= norms[:, None]
    if radii is not None:
        h *= np.asarray(radii, dtype=float)[:, None]
    return h


@dataclass(frozen=True, eq=False)
class Angles:
    azimuth: np.ndarray
    elevation: Optional[np.ndarray] = None


def orientation_to_angles(h: np.ndarray) -> Angles:
    """Azimuth in (-pi, pi] and, for 3-D, elevation in [-pi/2, pi/2].

    Rows on the vertical axis report azimuth 0.
    """
    h = np.asarray(h, dtype=float)
    if h.ndim != 2 or h.shape[1] not in (2, 3):
        raise DimensionError(f"orientation matrix must be m x 2 or m x 3, got shape {h.shape}")
    norms = np.linalg.norm(h, axis=1)
    if np.any(norms == 0):
        raise ValidationError("orientation has a zero row")
    planar = np.hypot(h[:, 0], h[:, 1])
    azimuth = np.arctan2(h[:, 1], h[:, 0])
    azimuth = np.where(planar <= 1e-12 * norms, 0.0, azimuth)
    azimuth = np.where(azimuth <= -np.pi, np.pi, azimuth)
    if h.shape[1] == 2:
        return Angles(azimuth=azimuth)
    elevation = np.arcsin(np.clip(h[:, 2] / norms, -1.0, 1.0))
    return Angles(azimuth=azimuth, elevation=elevation)


def angles_to_orientation(angles: Angles, radii: Optional[np.ndarray] = None) -> np.ndarray:
    az = np.asarray(angles.azimuth, dtype=float)
    if angles.elevation is None:
        h = np.column_stack([np.cos(az), np.sin(az)])
    else:
        el = np.asarray(angles.elevation, dtype=float)
        h = np.column_stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])
    if radii is not None:
        h *= np.asarray(radii, dtype=float)[:, None]
    return h
