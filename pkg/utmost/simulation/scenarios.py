# utmost/simulation/scenarios.py
"""Ready-made problem instances and placement sets for the solver and the simulator."""
import logging
from typing import Dict, Optional, Tuple

import numpy as np

from ..config import InitSpec, SolverConfig
from ..engine import solve
from ..models import (
    Criterion,
    ModelKind,
    ModelSpec,
    NoiseCovariance,
    random_orientation,
    tdoa_covariance,
    uniform_orientation,
)
from .localization import placement_to_sensors

logger = logging.getLogger(__name__)

# Correlated range-noise covariance of a six-sensor 3-D deployment.
CORRELATED_NOISE = np.array([
    [4.88, 3.07, -1.73, 1.90, 2.63, -1.61],
    [3.07, 11.72, -3.51, 4.48, 3.95, 0.24],
    [-1.73, -3.51, 21.82, -1.20, 0.49, -4.74],
    [1.90, 4.48, -1.20, 3.63, 3.71, 1.00],
    [2.63, 3.95, 0.49, 3.71, 8.45, 0.56],
    [-1.61, 0.24, -4.74, 1.00, 0.56, 4.22],
])
TDOA_RANGE_NOISE = np.diag([0.18, 0.02, 0.46, 0.72, 0.42, 0.49])
RSS_RANGES = np.array([50.0, 100.0, 150.0, 200.0, 250.0, 300.0])
FIXED_PLANAR_ROW = np.array([1.0, 1.0]) / np.sqrt(2.0)


def correlated_toa_case() -> Tuple[ModelSpec, NoiseCovariance]:
    return ModelSpec(ModelKind.TOA, m=6, n=3), NoiseCovariance(CORRELATED_NOISE)


def tdoa_case(reference_index: int = 0) -> Tuple[ModelSpec, NoiseCovariance]:
    spec = ModelSpec(ModelKind.TDOA, m=6, n=3, reference_index=reference_index)
    return spec, NoiseCovariance(tdoa_covariance(TDOA_RANGE_NOISE, reference_index))


def rss_case(path_loss: float = 2.0) -> Tuple[ModelSpec, NoiseCovariance]:
    spec = ModelSpec(ModelKind.RSS, m=6, n=3, ranges=RSS_RANGES, path_loss=path_loss)
    return spec, NoiseCovariance(CORRELATED_NOISE)


def aoa_case() -> Tuple[ModelSpec, NoiseCovariance]:
    return ModelSpec(ModelKind.AOA, m=6, n=3, ranges=RSS_RANGES), NoiseCovariance(CORRELATED_NOISE)


def planar_fixed_sensor_case() -> Tuple[ModelSpec, NoiseCovariance, SolverConfig]:
    """Three planar TOA sensors with the third pinned at 45 degrees."""
    spec = ModelSpec(ModelKind.TOA, m=3, n=2)
    h0 = uniform_orientation(3, 2)
    h0[2] = FIXED_PLANAR_ROW
    config = SolverConfig(init=InitSpec.explicit(h0), fixed_rows=(2,), record_path=True)
    return spec, NoiseCovariance.identity(3), config


def comparison_placements(
    spec: ModelSpec,
    noise: NoiseCovariance,
    criterion: Criterion,
    config: Optional[SolverConfig] = None,
    seed: int = 0,
) -> Dict[str, np.ndarray]:
    """Orientation matrices for the optimal, uniform and random placements."""
    result = solve(spec, noise, criterion, config)
    return {
        "optimal": result.h_opt,
        "uniform": uniform_orientation(spec.m, spec.n, spec.radii),
        "random": random_orientation(spec.m, spec.n, seed, spec.radii),
    }


def nominal_ranges(m: int, target: np.ndarray, center: np.ndarray, radius: float = 1.0) -> np.ndarray:
    """Distances from target to m sensors spread evenly on a circle around center."""
    angles = 2.0 * np.pi * np.arange(m) / m
    nominal = np.asarray(center, dtype=float)[None, :] + radius * np.column_stack([np.cos(angles), np.sin(angles)])
    return np.linalg.norm(nominal - np.asarray(target, dtype=float)[None, :], axis=1)


def range_knowledge_placements(
    m: int,
    target: np.ndarray,
    coarse_target: np.ndarray,
    noise: NoiseCovariance,
    criterion: Criterion = Criterion.A,
    path_loss: float = 2.0,
    center: Optional[np.ndarray] = None,
    radius: float = 1.0,
    config: Optional[SolverConfig] = None,
) -> Dict[str, np.ndarray]:
    """Planar RSS sensor sets designed with exact ranges and with coarse-target ranges.

    Both sets sit at the exact ranges from the true target; only the ranges
    fed to the placement solver differ.
    """
    center = np.zeros(2) if center is None else np.asarray(center, dtype=float)
    exact = nominal_ranges(m, target, center, radius)
    coarse = nominal_ranges(m, coarse_target, center, radius)
    placements = {}
    for name, design_ranges in (("perfect_d", exact), ("coarse_d", coarse)):
        spec = ModelSpec(ModelKind.RSS, m=m, n=2, ranges=design_ranges, path_loss=path_loss)
        h = solve(spec, noise, criterion, config).h_opt
        placements[name] = placement_to_sensors(h, target, exact)
        logger.info(f"{name}: design ranges {np.round(design_ranges, 4).tolist()}")
    return placements


def sensors_for(
    orientations: Dict[str, np.ndarray], center: np.ndarray, radius: float = 1.0
) -> Dict[str, np.ndarray]:
    return {name: placement_to_sensors(h, center, radius) for name, h in orientations.items()}

