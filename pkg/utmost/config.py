# utmost/config.py
"""Solver, grid, sanity and simulation settings with environment overrides."""
import logging
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from dotenv import load_dotenv

from .errors import ValidationError

load_dotenv()

LOG_LEVEL = os.getenv("UTMOST_LOG_LEVEL", "WARNING")
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: Optional[str] = None) -> None:
    level_name = (level or LOG_LEVEL).upper()
    logging.basicConfig(level=getattr(logging, level_name, logging.WARNING), format=LOG_FORMAT)


class InitKind(str, Enum):
    UNIFORM = "uniform"
    RANDOM = "random"
    EXPLICIT = "explicit"


@dataclass(frozen=True, eq=False)
class InitSpec:
    """How the solver seeds H_0: ±e_j uniform pattern, seeded random rows, or a caller matrix."""

    kind: InitKind = InitKind.UNIFORM
    seed: Optional[int] = None
    h0: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind == InitKind.RANDOM and self.seed is None:
            raise ValidationError("random initialization needs a seed", "solver.seed")
        if self.kind == InitKind.EXPLICIT and self.h0 is None:
            raise ValidationError("explicit initialization needs h0", "solver.h0")
        if self.h0 is not None:
            object.__setattr__(self, "h0", np.array(self.h0, dtype=float))

    @classmethod
    def uniform(cls) -> "InitSpec":
        return cls(InitKind.UNIFORM)

    @classmethod
    def random(cls, seed: int) -> "InitSpec":
        return cls(InitKind.RANDOM, seed=seed)

    @classmethod
    def explicit(cls, h0) -> "InitSpec":
        return cls(InitKind.EXPLICIT, h0=h0)


@dataclass
class SolverConfig:
    rho: float = float(os.getenv("UTMOST_RHO", "10.0"))
    max_outer: int = int(os.getenv("UTMOST_MAX_OUTER", "5000"))
    tol_primal: float = 1e-8
    tol_dual: float = 1e-8
    mm_x_max: int = 100
    mm_x_tol: float = 1e-10  # floor on the relative inner step
    mm_h_max: int = 100
    mm_h_tol: float = 1e-10
    mm_ratio: float = 0.1  # inner tolerance as a fraction of the last outer residual
    init: InitSpec = field(default_factory=InitSpec)
    fixed_rows: Tuple[int, ...] = ()
    record_path: bool = False
    record_inner: bool = False
    normalize: bool = True  # rescale Phi and R internally; the argmin is unchanged
    log_every: int = 100

    def __post_init__(self):
        self.fixed_rows = tuple(int(i) for i in self.fixed_rows)
        validate_solver_config(self)


def validate_solver_config(config: SolverConfig) -> None:
    if not np.isfinite(config.rho) or config.rho <= 0:
        raise ValidationError(f"rho must be positive, got {config.rho}", "solver.rho")
    for name in ("max_outer", "mm_x_max", "mm_h_max", "log_every"):
        if getattr(config, name) < 1:
            raise ValidationError(f"{name} must be at least 1", f"solver.{name}")
    for name in ("tol_primal", "tol_dual", "mm_x_tol", "mm_h_tol", "mm_ratio"):
        if getattr(config, name) < 0:
            raise ValidationError(f"{name} must be non-negative", f"solver.{name}")
    if len(set(config.fixed_rows)) != len(config.fixed_rows):
        raise ValidationError("fixed_rows has duplicates", "solver.fixed_rows")


@dataclass
class GridSpec:
    """Search box for the maximum-likelihood grid stage, one bound per coordinate."""

    lower: Tuple[float, ...] = (-1.0, -1.0)
    upper: Tuple[float, ...] = (1.0, 1.0)
    resolution: int = 201
    gn_iters: int = 50
    gn_tol: float = 1e-10

    def __post_init__(self):
        self.lower = tuple(float(v) for v in self.lower)
        self.upper = tuple(float(v) for v in self.upper)
        if len(self.lower) != len(self.upper):
            raise ValidationError("lower and upper bounds differ in length", "simulate.grid")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise ValidationError("every lower bound must be below its upper bound", "simulate.grid")
        if self.resolution < 3:
            raise ValidationError("resolution must be at least 3", "simulate.grid.resolution")
        if self.gn_iters < 0:
            raise ValidationError("gn_iters must be non-negative", "simulate.grid.gn_iters")

    @property
    def dim(self) -> int:
        return len(self.lower)


@dataclass
class SanityConfig:
    ms: Tuple[int, ...] = (5, 10, 15, 20, 25)
    n: int = 3
    upsilon: float = 1.0
    tol_a: float = 1e-3
    tol_d: float = 1e-3
    tol_e: float = 5e-3
    tol_structure: float = 1e-2
    seed: int = 7


@dataclass
class SimulationDefaults:
    target: Tuple[float, ...] = (0.1, -0.3)
    design_center: Tuple[float, ...] = (0.0, 0.0)
    coarse_target: Tuple[float, ...] = (0.0, 0.0)
    sensor_radius: float = 1.0
    noise_std: float = 0.3
    trials: int = 1000
    seed: int = 2021


class Settings:
    SOLVER = SolverConfig()
    GRID = GridSpec()
    SANITY = SanityConfig()
    SIMULATION = SimulationDefaults()
