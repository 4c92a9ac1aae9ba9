"""Deterministic synthetic radial feeder for closed-loop validation."""
from .generate import generate_timeseries, load_profiles, make_rng, simulate_to_csv
from .powerflow import PowerFlowResult, solve_power_flow, solve_snapshot
from .scenario import BUNDLED, FeederScenario, Line, Load, bundled_scenario, load_scenario

__all__ = [
    "BUNDLED",
    "FeederScenario",
    "Line",
    "Load",
    "PowerFlowResult",
    "bundled_scenario",
    "generate_timeseries",
    "load_profiles",
    "load_scenario",
    "make_rng",
    "simulate_to_csv",
    "solve_power_flow",
    "solve_snapshot",
]
