# utmost/simulation/localization.py
"""Monte-Carlo maximum-likelihood localization: grid search, Gauss-Newton refinement, CRLB."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.linalg import solve_triangular

from ..config import GridSpec
from ..errors import DimensionError, SimulationError, ValidationError
from ..mat_util import sample_correlated_noise
from ..models import ModelKind, NoiseCovariance, difference_matrix

logger = logging.getLogger(__name__)


@dataclass
class SimScenario:
    """Target, noise and estimator settings shared by every placement in a run.

    `noise` is the per-sensor noise covariance (m x m). For TDOA the differenced
    measurements carry K noise K^T.
    """
    kind: ModelKind
    target: np.ndarray
    noise: NoiseCovariance
    trials: int = 1000
    seed: int = 2021
    grid: GridSpec = field(default_factory=GridSpec)
    path_loss: float = 2.0
    reference_index: int = 0
    no_noise: bool = False

    def __post_init__(self):
        self.kind = ModelKind(self.kind)
        self.target = np.asarray(self.target, dtype=float).reshape(-1)
        if self.kind == ModelKind.AOA:
            raise ValidationError("Monte-Carlo localization covers TOA, TDOA and RSS", "model")
        if self.trials < 1:
            raise ValidationError("trials must be positive", "simulate.trials")
        if self.grid.dim != self.target.size:
            raise DimensionError(
                f"grid has {self.grid.dim} coordinates but the target has {self.target.size}", "simulate.grid"
            )

    @property
    def m(self) -> int:
        return self.noise.dim


@dataclass
class TrialOutcome:
    trial: int
    estimate: np.ndarray
    squared_error: float
    excluded: bool = False
    fallback: bool = False


@dataclass
class SimReport:
    name: str
    mse: float
    bias: float
    excluded: int
    trials: int
    crlb_trace: float
    mean_error: Optional[np.ndarray] = None
    outcomes: List[TrialOutcome] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for o in self.outcomes:
            row = {"placement": self.name, "trial": o.trial}
            row.update(zip("xyz", o.estimate))
            row["excluded"] = o.excluded
            rows.append(row)
        return pd.DataFrame(rows)


def placement_to_sensors(h: np.ndarray, center: np.ndarray, ranges: np.ndarray) -> np.ndarray:
    """Sensor positions r_i = center - d_i * h_i / ||h_i||."""
    h = np.asarray(h, dtype=float)
    ranges = np.broadcast_to(np.asarray(ranges, dtype=float), (h.shape[0],))
    units = h / np.linalg.norm(h, axis=1, keepdims=True)
    return np.asarray(center, dtype=float)[None, :] - ranges[:, None] * units


class MonteCarloLocalizer:
    """Maximum-likelihood localization over repeated noisy measurement draws."""

    def __init__(self, scenario: SimScenario):
        self.scenario = scenario
        m = scenario.m
        if scenario.kind == ModelKind.TDOA:
            self.k = difference_matrix(m, scenario.reference_index)
            cov = self.k @ scenario.noise.r @ self.k.T
        else:
            self.k = None
            cov = scenario.noise.r
        self.measurement_cov = 0.5 * (cov + cov.T)
        self.chol = np.linalg.cholesky(self.measurement_cov)
        self.grid_points = self._grid_points(scenario.grid)

    @staticmethod
    def _grid_points(grid: GridSpec) -> np.ndarray:
        axes = [np.linspace(lo, hi, grid.resolution) for lo, hi in zip(grid.lower, grid.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([c.ravel() for c in mesh])

    def expected(self, points: np.ndarray, sensors: np.ndarray) -> np.ndarray:
        """Noise-free measurements for each row of points (N x n) -> (N x k)."""
        dist = np.linalg.norm(points[:, None, :] - sensors[None, :, :], axis=2)
        kind = self.scenario.kind
        if kind == ModelKind.TOA:
            return 2.0 * dist
        if kind == ModelKind.TDOA:
            return dist @ self.k.T
        with np.errstate(divide="ignore"):
            return -self.scenario.path_loss * np.log(dist)

    def jacobian(self, p: np.ndarray, sensors: np.ndarray) -> np.ndarray:
        diff = p[None, :] - sensors
        dist = np.linalg.norm(diff, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            units = diff / dist[:, None]
            kind = self.scenario.kind
            if kind == ModelKind.TOA:
                return 2.0 * units
            if kind == ModelKind.TDOA:
                return self.k @ units
            return -self.scenario.path_loss * units / dist[:, None]

    def crlb_trace(self, sensors: np.ndarray) -> float:
        j = self.jacobian(self.scenario.target, sensors)
        fisher = j.T @ np.linalg.solve(self.measurement_cov, j)
        return float(np.trace(np.linalg.inv(fisher)))

    def measure(self, sensors: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        p = self.scenario.target[None, :]
        if self.scenario.kind == ModelKind.TDOA:
            dist = np.linalg.norm(p - sensors, axis=1)
            if not self.scenario.no_noise:
                dist = dist + sample_correlated_noise(self.scenario.noise.factor.chol, rng)
            return self.k @ dist
        z = self.expected(p, sensors)[0]
        if not self.scenario.no_noise:
            z = z + sample_correlated_noise(self.scenario.noise.factor.chol, rng)
        return z

    def _nll(self, z: np.ndarray, points: np.ndarray, sensors: np.ndarray) -> np.ndarray:
        residual = z[None, :] - self.expected(points, sensors)
        white = solve_triangular(self.chol, residual.T, lower=True, check_finite=False)
        nll = np.sum(white ** 2, axis=0)
        return np.where(np.isfinite(nll), nll, np.inf)

    def estimate(self, z: np.ndarray, sensors: np.ndarray) -> Tuple[Optional[np.ndarray], bool]:
        """Grid argmin (lowest index on ties) refined by Gauss-Newton.

        Returns (None, False) when no grid point has a finite likelihood and
        (grid point, True) when refinement was abandoned.
        """
        nll = self._nll(z, self.grid_points, sensors)
        best = int(np.argmin(nll))
        if not np.isfinite(nll[best]):
            return None, False
        start = self.grid_points[best].copy()
        p, value = start.copy(), float(nll[best])
        increases = 0
        grid = self.scenario.grid
        for _ in range(grid.gn_iters):
            j = self.jacobian(p, sensors)
            residual = z - self.expected(p[None, :], sensors)[0]
            w_j = np.linalg.solve(self.measurement_cov, j)
            try:
                step = np.linalg.solve(j.T @ w_j, w_j.T @ residual)
            except np.linalg.LinAlgError:
                return start, True
            if not np.all(np.isfinite(step)):
                return start, True
            candidate = p + step
            new_value = float(self._nll(z, candidate[None, :], sensors)[0])
            if not np.isfinite(new_value):
                return start, True
            increases = increases + 1 if new_value > value else 0
            if increases >= 2:
                return start, True
            p, value = candidate, new_value
            if np.linalg.norm(step) <= grid.gn_tol:
                break
        return p, False

    def run_trial(self, sensors: np.ndarray, trial: int) -> TrialOutcome:
        rng = np.random.default_rng([self.scenario.seed, trial])
        z = self.measure(sensors, rng)
        estimate, fallback = self.estimate(z, sensors)
        if estimate is None:
            nan = np.full(self.scenario.target.size, np.nan)
            return TrialOutcome(trial, nan, float("nan"), excluded=True)
        error = estimate - self.scenario.target
        return TrialOutcome(trial, estimate, float(error @ error), fallback=fallback)

    def run(self, name: str, sensors: np.ndarray, workers: int = 1) -> SimReport:
        sensors = np.asarray(sensors, dtype=float)
        if sensors.shape != (self.scenario.m, self.scenario.target.size):
            raise DimensionError(
                f"placement {name!r} has shape {sensors.shape}, expected "
                f"({self.scenario.m}, {self.scenario.target.size})"
            )
        if np.min(np.linalg.norm(sensors - self.scenario.target[None, :], axis=1)) <= 1e-9:
            raise ValidationError(f"placement {name!r} puts a sensor on the target", "simulate.placements")
        trials = range(self.scenario.trials)
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                outcomes = list(pool.map(lambda t: self.run_trial(sensors, t), trials))
        else:
            outcomes = [self.run_trial(sensors, t) for t in trials]
        return self.analyze(name, sensors, outcomes)

    def analyze(self, name: str, sensors: np.ndarray, outcomes: List[TrialOutcome]) -> SimReport:
        kept = [o for o in outcomes if not o.excluded]
        excluded = len(outcomes) - len(kept)
        if not kept:
            raise SimulationError(f"every trial for placement {name!r} had a non-finite likelihood")
        if excluded:
            logger.warning(f"Placement {name}: {excluded} trial(s) excluded for non-finite likelihood")
        fallbacks = sum(o.fallback for o in kept)
        if fallbacks:
            logger.info(f"Placement {name}: Gauss-Newton fell back to the grid in {fallbacks} trial(s)")
        errors = np.array([o.estimate for o in kept]) - self.scenario.target
        report = SimReport(
            name=name,
            mse=float(np.mean(np.sum(errors ** 2, axis=1))),
            bias=float(np.linalg.norm(errors.mean(axis=0))),
            excluded=excluded,
            trials=len(outcomes),
            crlb_trace=self.crlb_trace(sensors),
            mean_error=errors.mean(axis=0),
            outcomes=outcomes,
        )
        logger.info(f"Placement {name}: MSE {report.mse:.6g} (CRLB trace {report.crlb_trace:.6g})")
        return report


def run_monte_carlo(
    scenario: SimScenario, placements: Dict[str, np.ndarray], workers: int = 1
) -> Dict[str, SimReport]:
    """One report per named sensor set; every placement sees the same per-trial noise streams."""
    if not placements:
        raise ValidationError("no placements to simulate", "simulate.placements")
    localizer = MonteCarloLocalizer(scenario)
    return {name: localizer.run(name, sensors, workers) for name, sensors in placements.items()}
