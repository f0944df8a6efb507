"""Optimal sensor-target orientation for TOA, TDOA, RSS and AOA localization."""
from .config import GridSpec, InitSpec, SolverConfig
from .engine import PlacementResult, Termination, solve
from .errors import (
    DimensionError,
    NotPositiveDefiniteError,
    SimulationError,
    SolverAbort,
    UtmostError,
    ValidationError,
)
from .models import (
    Criterion,
    ModelKind,
    ModelSpec,
    NoiseCovariance,
    build_phi,
    criterion_value,
    fim,
    orientation_to_angles,
    theoretical_optimum,
)

__version__ = "0.1.0"
