# utmost/landscape.py
"""Criterion surface over the azimuths of two planar sensors, others held fixed."""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .errors import DimensionError, ValidationError
from .models import (
    Criterion,
    ModelSpec,
    NoiseCovariance,
    build_phi,
    criterion_value,
    information_operator,
    orientation_to_angles,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Landscape:
    phi1: np.ndarray
    phi2: np.ndarray
    values: np.ndarray  # values[i, j] at (phi1[i], phi2[j])
    free_rows: Tuple[int, int]

    def argmin(self) -> Tuple[float, float, float]:
        i, j = np.unravel_index(np.argmin(self.values), self.values.shape)
        return float(self.phi1[i]), float(self.phi2[j]), float(self.values[i, j])

    def to_frame(self) -> pd.DataFrame:
        p1, p2 = np.meshgrid(self.phi1, self.phi2, indexing="ij")
        return pd.DataFrame({"phi1": p1.ravel(), "phi2": p2.ravel(), "objective": self.values.ravel()})


def objective_landscape(
    spec: ModelSpec,
    noise: NoiseCovariance,
    criterion: Criterion,
    h_base: np.ndarray,
    free_rows: Sequence[int] = (0, 1),
    resolution: int = 361,
) -> Landscape:
    """Evaluate the criterion on a grid of azimuths in [-pi, pi] for two free rows.

    Rows of h_base outside free_rows stay put; the free rows keep their norms.
    """
    if spec.n != 2:
        raise DimensionError("landscape needs a planar model (n = 2)")
    free_rows = tuple(int(i) for i in free_rows)
    if len(free_rows) != 2 or free_rows[0] == free_rows[1]:
        raise ValidationError("landscape needs exactly two distinct free rows", "landscape.free_rows")
    if not all(0 <= i < spec.m for i in free_rows):
        raise ValidationError(f"free rows {free_rows} out of range", "landscape.free_rows")
    if resolution < 2:
        raise ValidationError("resolution must be at least 2", "landscape.resolution")

    h_base = np.asarray(h_base, dtype=float)
    q = information_operator(build_phi(spec), noise)
    radii = spec.radii
    grid = np.linspace(-np.pi, np.pi, resolution)
    values = np.empty((resolution, resolution))
    h = h_base.copy()
    a, b = free_rows
    for i, p1 in enumerate(grid):
        h[a] = radii[a] * np.array([np.cos(p1), np.sin(p1)])
        for j, p2 in enumerate(grid):
            h[b] = radii[b] * np.array([np.cos(p2), np.sin(p2)])
            values[i, j] = criterion_value(h.T @ q @ h, criterion)
    logger.info(f"Landscape over rows {free_rows}: {resolution}x{resolution} points")
    return Landscape(phi1=grid, phi2=grid.copy(), values=values, free_rows=free_rows)


def path_azimuths(path: Optional[List[np.ndarray]], free_rows: Sequence[int] = (0, 1)) -> np.ndarray:
    """Azimuth trajectory (iterations x 2) of the free rows along a recorded solver path."""
    if not path:
        raise ValidationError("solver path was not recorded; set record_path")
    rows = list(free_rows)
    return np.array([orientation_to_angles(h[rows]).azimuth for h in path])
