"""Grade-aware adaptive cruise control: vehicle model, safe set, MPC and scenario harness."""

from .dynamics import VehicleParams, VehicleState, aero_drag, gravity_force, linearize, rolling_resistance, step_euler
from .grade import GradeProfile, InputError, from_elevation, grade_at, preview_over_horizon, synthetic_sine
from .ident import fit_parameters, simulate_dataset
from .metrics import PerformanceReport, comfort_index, energy_index, performance_report, tracking_index
from .mpc import Controller, LeadPrediction, MPCConfig, build_problem, solve, step
from .safeset import SafeSetBoundary, compute_boundary, conservative_boundary, d_safe, safe_time_gap
from .scenarios import (
    ScenarioConfig,
    ScenarioLog,
    SafetyViolation,
    project_lead_for_intersection,
    simulate_car_following,
    simulate_intersection,
    simulate_switching,
)

__all__ = [
    "Controller",
    "GradeProfile",
    "InputError",
    "LeadPrediction",
    "MPCConfig",
    "PerformanceReport",
    "SafeSetBoundary",
    "SafetyViolation",
    "ScenarioConfig",
    "ScenarioLog",
    "VehicleParams",
    "VehicleState",
    "aero_drag",
    "build_problem",
    "comfort_index",
    "compute_boundary",
    "conservative_boundary",
    "d_safe",
    "energy_index",
    "fit_parameters",
    "from_elevation",
    "grade_at",
    "gravity_force",
    "linearize",
    "performance_report",
    "preview_over_horizon",
    "project_lead_for_intersection",
    "rolling_resistance",
    "safe_time_gap",
    "simulate_car_following",
    "simulate_dataset",
    "simulate_intersection",
    "simulate_switching",
    "solve",
    "step",
    "step_euler",
    "synthetic_sine",
    "tracking_index",
]
