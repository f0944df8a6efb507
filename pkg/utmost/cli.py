# utmost/cli.py
"""Command-line entry point: solve, sanity, simulate and landscape."""
import argparse
import logging
import sys
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from .config import InitSpec, SanityConfig, Settings, SolverConfig, configure_logging
from .engine import Termination, solve
from .errors import SimulationError, SolverAbort, UtmostError, ValidationError
from .io import load_run_config, read_result, write_landscape, write_per_trial, write_report, write_result, write_trace
from .landscape import objective_landscape
from .models import Criterion, ModelKind, ModelSpec, NoiseCovariance, theoretical_optimum, uniform_orientation
from .simulation.localization import SimScenario, run_monte_carlo
from .simulation.scenarios import comparison_placements, range_knowledge_placements, sensors_for

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_ABORT = 2
EXIT_SANITY = 3


def exit_code_for(error: UtmostError) -> int:
    if isinstance(error, ValidationError):
        return EXIT_VALIDATION
    if isinstance(error, (SolverAbort, SimulationError)):
        return EXIT_ABORT
    return EXIT_VALIDATION


def run_sanity(
    config: Optional[SanityConfig] = None,
    solver_config: Optional[SolverConfig] = None,
    theory: Callable[..., float] = theoretical_optimum,
) -> pd.DataFrame:
    """Solve every (m, criterion) TOA cell with Phi = I, R = upsilon^2 I against the closed form.

    `theory` supplies the expected value, so a wrong constant can be injected. The
    uniform start is a stationary point of this problem, so the default solver
    starts from a seeded random orientation.
    """
    config = config or Settings.SANITY
    solver_config = solver_config or SolverConfig(init=InitSpec.random(config.seed))
    tolerances = {Criterion.A: config.tol_a, Criterion.D: config.tol_d, Criterion.E: config.tol_e}
    rows = []
    for m in config.ms:
        spec = ModelSpec(ModelKind.TOA, m=m, n=config.n)
        noise = NoiseCovariance.identity(m, config.upsilon)
        for criterion in Criterion:
            result = solve(spec, noise, criterion, solver_config)
            expected = theory(m, config.upsilon, criterion, n=config.n)
            gram = result.h_opt.T @ result.h_opt
            structure = float(np.linalg.norm(gram - (m / config.n) * np.eye(config.n)))
            error = abs(result.objective - expected)
            rows.append({
                "m": m,
                "criterion": criterion.value,
                "value": result.objective,
                "expected": expected,
                "error": error,
                "structure": structure,
                "iterations": result.iterations,
                "termination": result.termination.value,
                "passed": bool(
                    result.termination == Termination.CONVERGED
                    and error <= tolerances[criterion]
                    and structure <= config.tol_structure
                ),
            })
    return pd.DataFrame(rows)


def cmd_solve(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    result = solve(cfg.spec, cfg.noise, cfg.criterion, cfg.solver)
    write_result(args.out, result, cfg.spec)
    if args.trace:
        write_trace(args.trace, result.trace)
    # re-read so the written rows are what gets checked
    h = read_result(args.out)["h"]
    if not np.allclose(np.linalg.norm(h, axis=1), cfg.spec.radii, rtol=0, atol=1e-12):
        raise SolverAbort("result rows drifted from the prescribed norms", result.iterations)

    print(f"\n{cfg.spec.kind.value.upper()} {cfg.criterion.value}-optimal placement, m={cfg.spec.m}, n={cfg.spec.n}")
    print(f"{'Objective':<26} {result.objective:.10g}")
    print(f"{'Model-scaled objective':<26} {result.objective_model_scaled:.10g}")
    print(f"{'Uniform placement':<26} {result.baseline_objective:.10g}")
    print(f"{'Improvement':<26} {result.improvement:.2%}")
    print(f"{'Iterations':<26} {result.iterations} ({result.termination.value})")
    return EXIT_OK


def cmd_sanity(args: argparse.Namespace) -> int:
    defaults = Settings.SANITY
    config = SanityConfig(
        ms=tuple(args.ms) if args.ms else defaults.ms,
        tol_a=args.tol_a,
        tol_d=args.tol_d,
        tol_e=args.tol_e,
    )
    table = run_sanity(config)
    print(table.to_string(index=False, float_format=lambda v: f"{v:.6g}"))
    passed = int(table["passed"].sum())
    print(f"\n{passed}/{len(table)} cells pass")
    return EXIT_OK if passed == len(table) else EXIT_SANITY


def _simulation_noise(cfg, sim) -> NoiseCovariance:
    m = cfg.spec.m
    if sim.noise_std is not None:
        return NoiseCovariance.identity(m, sim.noise_std)
    if cfg.range_noise is None:
        raise ValidationError("needs noise_std or a per-sensor model.noise", "simulate.noise_std")
    return NoiseCovariance(cfg.range_noise)


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    sim = cfg.simulate
    if sim is None:
        raise ValidationError("missing required block", "simulate")
    noise = _simulation_noise(cfg, sim)
    scenario = SimScenario(
        kind=cfg.spec.kind,
        target=sim.target,
        noise=noise,
        trials=sim.trials,
        seed=sim.seed,
        grid=sim.grid,
        path_loss=cfg.spec.path_loss,
        reference_index=cfg.spec.reference_index or 0,
        no_noise=sim.no_noise,
    )
    if sim.coarse_target is not None:
        sensors = range_knowledge_placements(
            cfg.spec.m,
            sim.target,
            sim.coarse_target,
            noise,
            cfg.criterion,
            path_loss=cfg.spec.path_loss,
            center=sim.design_center,
            radius=sim.sensor_radius,
            config=cfg.solver,
        )
    else:
        orientations = comparison_placements(cfg.spec, cfg.noise, cfg.criterion, cfg.solver, seed=sim.seed)
        sensors = sensors_for(orientations, sim.design_center, sim.sensor_radius)
    sensors = {name: sensors[name] for name in sim.placements}

    reports = run_monte_carlo(scenario, sensors, workers=sim.workers)
    write_report(args.out, reports)
    if args.per_trial:
        write_per_trial(args.per_trial, reports)

    print(f"\n{'Placement':<12} {'MSE':>12} {'Bias':>12} {'CRLB':>12} {'Excluded':>9}")
    print("-" * 61)
    for r in reports.values():
        print(f"{r.name:<12} {r.mse:>12.6g} {r.bias:>12.6g} {r.crlb_trace:>12.6g} {r.excluded:>9}")
    return EXIT_OK


def cmd_landscape(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    section = cfg.landscape
    if section.base == "optimal":
        base = solve(cfg.spec, cfg.noise, cfg.criterion, cfg.solver).h_opt
    else:
        base = uniform_orientation(cfg.spec.m, cfg.spec.n, cfg.spec.radii)
    landscape = objective_landscape(
        cfg.spec, cfg.noise, cfg.criterion, base, section.free_rows, section.resolution
    )
    write_landscape(args.out, landscape)
    phi1, phi2, value = landscape.argmin()
    print(f"Grid minimum {value:.10g} at phi1={np.degrees(phi1):.2f} deg, phi2={np.degrees(phi2):.2f} deg")
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace], int]] = {
    "solve": cmd_solve,
    "sanity": cmd_sanity,
    "simulate": cmd_simulate,
    "landscape": cmd_landscape,
}


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """
    Parses command line arguments for the placement solver.

    Returns:
        argparse.Namespace: the sub-command and its options.
    """
    parser = argparse.ArgumentParser(
        prog="utmost", description="Optimal sensor-target orientation for TOA/TDOA/RSS/AOA localization"
    )
    parser.add_argument("--log-level", default=None, help="Logging level (defaults to UTMOST_LOG_LEVEL).")
    sub = parser.add_subparsers(dest="command", required=True)

    solve_p = sub.add_parser("solve", help="Solve one placement problem from a run config.")
    solve_p.add_argument("--config", required=True, help="YAML run config.")
    solve_p.add_argument("--out", required=True, help="Result file (YAML).")
    solve_p.add_argument("--trace", default=None, help="Convergence trace (CSV).")

    sanity_p = sub.add_parser("sanity", help="Check the solver against closed-form optima.")
    sanity_p.add_argument("--tol-a", type=float, default=Settings.SANITY.tol_a)
    sanity_p.add_argument("--tol-d", type=float, default=Settings.SANITY.tol_d)
    sanity_p.add_argument("--tol-e", type=float, default=Settings.SANITY.tol_e)
    sanity_p.add_argument("--ms", type=int, nargs="+", default=None, help="Sensor counts to check.")

    sim_p = sub.add_parser("simulate", help="Monte-Carlo MLE comparison of placements.")
    sim_p.add_argument("--config", required=True)
    sim_p.add_argument("--out", required=True, help="Report file (YAML).")
    sim_p.add_argument("--per-trial", default=None, help="Per-trial estimates (CSV).")

    land_p = sub.add_parser("landscape", help="Criterion surface over two free azimuths (n = 2).")
    land_p.add_argument("--config", required=True)
    land_p.add_argument("--out", required=True, help="Surface (CSV phi1,phi2,objective).")

    return parser.parse_args(argv)


def validate_args(args: argparse.Namespace):
    """
    Validates option values that argparse cannot check on its own.

    Raises:
        ValidationError: If any argument fails validation.
    """
    if args.command == "sanity":
        for name in ("tol_a", "tol_d", "tol_e"):
            if getattr(args, name) <= 0:
                raise ValidationError("tolerance must be positive", f"--{name.replace('_', '-')}")
        if args.ms and any(m < Settings.SANITY.n + 1 for m in args.ms):
            raise ValidationError(f"sensor counts must be at least {Settings.SANITY.n + 1}", "--ms")


def main(argv: Optional[List[str]] = None) -> int:
    args = parse_args(argv)
    configure_logging(args.log_level)
    try:
        validate_args(args)
        return COMMANDS[args.command](args)
    except UtmostError as e:
        logger.debug("command failed", exc_info=True)
        print(f"error: {e.kind}: {e}", file=sys.stderr)
        return exit_code_for(e)


if __name__ == "__main__":
    sys.exit(main())
