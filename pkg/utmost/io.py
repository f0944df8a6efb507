# utmost/io.py
"""Run-config parsing and result, trace, report and landscape writers."""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np
import pandas as pd
import yaml

from .config import GridSpec, InitKind, InitSpec, Settings, SolverConfig
from .engine import PlacementResult
from .errors import DimensionError, ValidationError
from .landscape import Landscape
from .models import Criterion, ModelKind, ModelSpec, NoiseCovariance, orientation_to_angles, tdoa_covariance
from .simulation.localization import SimReport
from .trace import ConvergenceTrace

logger = logging.getLogger(__name__)

MODEL_KEYS = {"kind", "m", "n", "noise", "reference_index", "ranges", "path_loss", "row_norms"}
SOLVER_KEYS = {
    "rho", "max_outer", "tol_primal", "tol_dual", "mm_x_max", "mm_x_tol", "mm_h_max", "mm_h_tol", "mm_ratio",
    "init", "seed", "h0", "fixed_rows", "record_path", "normalize", "log_every",
}
SIMULATE_KEYS = {
    "target", "design_center", "sensor_radius", "trials", "seed", "grid", "noise_std", "no_noise",
    "coarse_target", "placements", "workers",
}
GRID_KEYS = {"lower", "upper", "resolution", "gn_iters", "gn_tol"}
LANDSCAPE_KEYS = {"free_rows", "resolution", "base"}
TOP_KEYS = {"model", "criterion", "solver", "simulate", "landscape"}
PLACEMENT_NAMES = ("optimal", "uniform", "random")


@dataclass
class SimulateSection:
    target: np.ndarray
    design_center: np.ndarray
    sensor_radius: float
    trials: int
    seed: int
    grid: GridSpec
    noise_std: Optional[float] = None
    no_noise: bool = False
    coarse_target: Optional[np.ndarray] = None
    placements: Tuple[str, ...] = PLACEMENT_NAMES
    workers: int = 1


@dataclass
class LandscapeSection:
    free_rows: Tuple[int, int] = (0, 1)
    resolution: int = 361
    base: str = "optimal"


@dataclass
class RunConfig:
    spec: ModelSpec
    noise: NoiseCovariance
    criterion: Criterion
    solver: SolverConfig
    range_noise: Optional[np.ndarray] = None
    simulate: Optional[SimulateSection] = None
    landscape: LandscapeSection = field(default_factory=LandscapeSection)


def _check_keys(block: Dict[str, Any], allowed, path: str) -> None:
    unknown = sorted(set(block) - set(allowed))
    if unknown:
        raise ValidationError(f"unknown field(s) {unknown}", path)


def _block(doc: Dict[str, Any], key: str, required: bool = False) -> Dict[str, Any]:
    value = doc.get(key)
    if value is None:
        if required:
            raise ValidationError("missing required block", key)
        return {}
    if not isinstance(value, dict):
        raise ValidationError("must be a mapping", key)
    return value


def _as_int(value, path: str, minimum: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ValidationError(f"expected an integer, got {value!r}", path)
    value = int(value)
    if minimum is not None and value < minimum:
        raise ValidationError(f"must be at least {minimum}, got {value}", path)
    return value


def _as_float(value, path: str) -> float:
    try:
        result = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"expected a number, got {value!r}", path)
    if not np.isfinite(result):
        raise ValidationError(f"must be finite, got {value!r}", path)
    return result


def _as_array(value, path: str, ndim: int) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError("expected numbers", path)
    if arr.ndim != ndim:
        raise DimensionError(f"expected a {ndim}-D array, got shape {arr.shape}", path)
    return arr


def _as_bool(value, path: str) -> bool:
    if not isinstance(value, bool):
        raise ValidationError(f"expected true or false, got {value!r}", path)
    return value


def _parse_noise(value, spec: ModelSpec) -> Tuple[NoiseCovariance, Optional[np.ndarray]]:
    """Noise block -> (covariance the solver uses, per-sensor range noise if known)."""
    path = "model.noise"
    dim = spec.phi_rows
    if value is None or value == "identity":
        raw, sub = np.eye(spec.m), None
    elif isinstance(value, dict) and len(value) == 1:
        (kind, payload), = value.items()
        sub = f"{path}.{kind}"
        if kind == "scaled":
            raw = _as_float(payload, sub) ** 2 * np.eye(spec.m)
        elif kind == "matrix":
            raw = _as_array(payload, sub, 2)
        elif kind == "diag":
            raw = np.diag(_as_array(payload, sub, 1))
        else:
            raise ValidationError(f"unknown noise form {kind!r}; use identity, scaled, matrix or diag", path)
    else:
        raise ValidationError("expected 'identity' or one of {scaled, matrix, diag}", path)

    where = sub or path
    try:
        if spec.kind == ModelKind.TDOA and raw.shape == (spec.m, spec.m):
            return NoiseCovariance(tdoa_covariance(raw, spec.reference_index)), raw
        if raw.shape != (dim, dim):
            raise DimensionError(f"expected a {dim}x{dim} covariance, got shape {raw.shape}")
        range_noise = raw if dim == spec.m else None
        return NoiseCovariance(raw), range_noise
    except ValidationError as e:
        raise e.at(where)


def validate_model(block: Dict[str, Any]) -> Tuple[ModelSpec, NoiseCovariance, Optional[np.ndarray]]:
    _check_keys(block, MODEL_KEYS, "model")
    kind = block.get("kind")
    try:
        kind = ModelKind(str(kind).lower())
    except ValueError:
        raise ValidationError(f"unknown model {kind!r}; use toa, tdoa, rss or aoa", "model.kind")
    if "m" not in block:
        raise ValidationError("missing sensor count", "model.m")
    kwargs = {
        "kind": kind,
        "m": _as_int(block["m"], "model.m", 1),
        "n": _as_int(block.get("n", 3), "model.n", 2),
    }
    if block.get("reference_index") is not None:
        kwargs["reference_index"] = _as_int(block["reference_index"], "model.reference_index", 0)
    if block.get("ranges") is not None:
        kwargs["ranges"] = _as_array(block["ranges"], "model.ranges", 1)
    if block.get("path_loss") is not None:
        kwargs["path_loss"] = _as_float(block["path_loss"], "model.path_loss")
    if block.get("row_norms") is not None:
        kwargs["row_norms"] = _as_array(block["row_norms"], "model.row_norms", 1)
    try:
        spec = ModelSpec(**kwargs)
    except ValidationError as e:
        raise e.at("model")
    noise, range_noise = _parse_noise(block.get("noise"), spec)
    return spec, noise, range_noise


def validate_solver(block: Dict[str, Any]) -> SolverConfig:
    _check_keys(block, SOLVER_KEYS, "solver")
    kwargs = {}
    for name in ("max_outer", "mm_x_max", "mm_h_max", "log_every"):
        if name in block:
            kwargs[name] = _as_int(block[name], f"solver.{name}", 1)
    for name in ("rho", "tol_primal", "tol_dual", "mm_x_tol", "mm_h_tol", "mm_ratio"):
        if name in block:
            kwargs[name] = _as_float(block[name], f"solver.{name}")
    for name in ("record_path", "normalize"):
        if name in block:
            kwargs[name] = _as_bool(block[name], f"solver.{name}")
    if "fixed_rows" in block:
        rows = block["fixed_rows"] or []
        if not isinstance(rows, list):
            raise ValidationError("expected a list of row indices", "solver.fixed_rows")
        kwargs["fixed_rows"] = tuple(_as_int(r, "solver.fixed_rows", 0) for r in rows)

    init = str(block.get("init", InitKind.UNIFORM.value)).lower()
    seed = _as_int(block["seed"], "solver.seed", 0) if block.get("seed") is not None else None
    if init == InitKind.UNIFORM.value:
        kwargs["init"] = InitSpec.uniform()
    elif init == InitKind.RANDOM.value:
        kwargs["init"] = InitSpec(InitKind.RANDOM, seed=seed)
    elif init == InitKind.EXPLICIT.value:
        if block.get("h0") is None:
            raise ValidationError("explicit initialization needs h0", "solver.h0")
        kwargs["init"] = InitSpec.explicit(_as_array(block["h0"], "solver.h0", 2))
    else:
        raise ValidationError(f"unknown init {init!r}; use uniform, random or explicit", "solver.init")
    logger.debug(f"Solver overrides: {sorted(kwargs)}")
    return SolverConfig(**kwargs)


def validate_simulate(block: Dict[str, Any], spec: ModelSpec) -> SimulateSection:
    _check_keys(block, SIMULATE_KEYS, "simulate")
    defaults = Settings.SIMULATION
    n = spec.n

    def point(key, default):
        value = _as_array(block.get(key, default), f"simulate.{key}", 1)
        if value.shape != (n,):
            raise DimensionError(f"expected {n} coordinates, got {value.size}", f"simulate.{key}")
        return value

    grid_block = block.get("grid") or {}
    if not isinstance(grid_block, dict):
        raise ValidationError("must be a mapping", "simulate.grid")
    _check_keys(grid_block, GRID_KEYS, "simulate.grid")
    grid_kwargs = {
        "lower": tuple(_as_array(grid_block.get("lower", [-1.0] * n), "simulate.grid.lower", 1)),
        "upper": tuple(_as_array(grid_block.get("upper", [1.0] * n), "simulate.grid.upper", 1)),
    }
    if "resolution" in grid_block:
        grid_kwargs["resolution"] = _as_int(grid_block["resolution"], "simulate.grid.resolution", 3)
    if "gn_iters" in grid_block:
        grid_kwargs["gn_iters"] = _as_int(grid_block["gn_iters"], "simulate.grid.gn_iters", 0)
    if "gn_tol" in grid_block:
        grid_kwargs["gn_tol"] = _as_float(grid_block["gn_tol"], "simulate.grid.gn_tol")

    allowed = ("perfect_d", "coarse_d") if block.get("coarse_target") is not None else PLACEMENT_NAMES
    placements = block.get("placements")
    if placements is None:
        placements = allowed
    elif not isinstance(placements, list) or not placements:
        raise ValidationError("expected a non-empty list of placement names", "simulate.placements")
    for name in placements:
        if name not in allowed:
            raise ValidationError(f"unknown placement {name!r}; choose from {list(allowed)}", "simulate.placements")

    if spec.kind == ModelKind.AOA:
        raise ValidationError("AOA placements are solved but not simulated", "model.kind")
    if block.get("coarse_target") is not None and (spec.kind != ModelKind.RSS or n != 2):
        raise ValidationError("coarse_target applies to planar RSS runs", "simulate.coarse_target")

    noise_std = block.get("noise_std", defaults.noise_std)
    return SimulateSection(
        target=point("target", list(defaults.target) + [0.0] * (n - 2)),
        design_center=point("design_center", [0.0] * n),
        sensor_radius=_as_float(block.get("sensor_radius", defaults.sensor_radius), "simulate.sensor_radius"),
        trials=_as_int(block.get("trials", defaults.trials), "simulate.trials", 1),
        seed=_as_int(block.get("seed", defaults.seed), "simulate.seed", 0),
        grid=GridSpec(**grid_kwargs),
        noise_std=None if noise_std is None else _as_float(noise_std, "simulate.noise_std"),
        no_noise=_as_bool(block.get("no_noise", False), "simulate.no_noise"),
        coarse_target=None if block.get("coarse_target") is None else point("coarse_target", None),
        placements=tuple(placements),
        workers=_as_int(block.get("workers", 1), "simulate.workers", 1),
    )


def validate_landscape(block: Dict[str, Any]) -> LandscapeSection:
    _check_keys(block, LANDSCAPE_KEYS, "landscape")
    rows = block.get("free_rows", [0, 1])
    if not isinstance(rows, list) or len(rows) != 2:
        raise ValidationError("expected two row indices", "landscape.free_rows")
    base = str(block.get("base", "optimal"))
    if base not in ("optimal", "uniform"):
        raise ValidationError(f"unknown base {base!r}; use optimal or uniform", "landscape.base")
    return LandscapeSection(
        free_rows=tuple(_as_int(r, "landscape.free_rows", 0) for r in rows),
        resolution=_as_int(block.get("resolution", 361), "landscape.resolution", 2),
        base=base,
    )


def parse_run_config(doc: Any) -> RunConfig:
    if not isinstance(doc, dict):
        raise ValidationError("run config must be a mapping", "config")
    _check_keys(doc, TOP_KEYS, "config")
    spec, noise, range_noise = validate_model(_block(doc, "model", required=True))
    try:
        criterion = Criterion(str(doc.get("criterion", "A")).upper())
    except ValueError:
        raise ValidationError(f"unknown criterion {doc.get('criterion')!r}; use A, D or E", "criterion")
    simulate = None
    if doc.get("simulate") is not None:
        simulate = validate_simulate(_block(doc, "simulate"), spec)
    return RunConfig(
        spec=spec,
        noise=noise,
        criterion=criterion,
        solver=validate_solver(_block(doc, "solver")),
        range_noise=range_noise,
        simulate=simulate,
        landscape=validate_landscape(_block(doc, "landscape")),
    )


def load_run_config(path) -> RunConfig:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except OSError as e:
        raise ValidationError(f"cannot read config: {e.strerror}", "config")
    except yaml.YAMLError as e:
        raise ValidationError(f"not valid YAML: {e}", "config")
    logger.info(f"Loaded run config from {path}")
    return parse_run_config(doc)


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def result_document(result: PlacementResult, spec: ModelSpec) -> Dict[str, Any]:
    angles = orientation_to_angles(result.h_opt)
    angle_rows = []
    for i in range(spec.m):
        entry = {"azimuth": fmt(angles.azimuth[i])}
        if angles.elevation is not None:
            entry["elevation"] = fmt(angles.elevation[i])
        angle_rows.append(entry)
    return {
        "model": spec.kind.value,
        "criterion": result.criterion.value,
        "m": spec.m,
        "n": spec.n,
        "h": [[fmt(v) for v in row] for row in result.h_opt],
        "angles": angle_rows,
        "objective": fmt(result.objective),
        "objective_model_scaled": fmt(result.objective_model_scaled),
        "baseline_objective": fmt(result.baseline_objective),
        "improvement": fmt(result.improvement),
        "iterations": result.iterations,
        "best_iteration": result.best_iteration,
        "termination": result.termination.value,
        "degenerate_events": result.degenerate_events,
        "wall_time": fmt(result.wall_time),
    }


def write_result(path, result: PlacementResult, spec: ModelSpec) -> None:
    Path(path).write_text(yaml.safe_dump(result_document(result, spec), sort_keys=False))


def read_result(path) -> Dict[str, Any]:
    doc = yaml.safe_load(Path(path).read_text())
    doc["h"] = np.array([[float(v) for v in row] for row in doc["h"]])
    for key in ("objective", "objective_model_scaled", "baseline_objective", "improvement", "wall_time"):
        doc[key] = float(doc[key])
    return doc


def write_trace(path, trace: ConvergenceTrace) -> None:
    trace.to_frame().to_csv(path, index=False, float_format="%.17g")


def write_report(path, reports: Dict[str, SimReport]) -> None:
    doc = {
        "placements": [
            {
                "name": r.name,
                "mse": fmt(r.mse),
                "bias": fmt(r.bias),
                "excluded": r.excluded,
                "trials": r.trials,
                "crlb_trace": fmt(r.crlb_trace),
            }
            for r in reports.values()
        ]
    }
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False))


def write_per_trial(path, reports: Dict[str, SimReport]) -> None:
    frame = pd.concat([r.to_frame() for r in reports.values()], ignore_index=True)
    frame.to_csv(path, index=False, float_format="%.17g")


def write_landscape(path, landscape: Landscape) -> None:
    landscape.to_frame().to_csv(path, index=False, float_format="%.17g")
