from .localization import (
    MonteCarloLocalizer,
    SimReport,
    SimScenario,
    TrialOutcome,
    placement_to_sensors,
    run_monte_carlo,
)

__all__ = [
    "MonteCarloLocalizer",
    "SimReport",
    "SimScenario",
    "TrialOutcome",
    "placement_to_sensors",
    "run_monte_carlo",
]
