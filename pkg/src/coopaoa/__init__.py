"""Cooperative vehicle localization from angle-of-arrival measurements.

Posterior-linearization belief propagation: edges are re-linearized with
sigma-point statistical linear regression against the current joint beliefs,
then Gaussian BP runs on the linearized factor graph.
"""

from coopaoa.gaussian import Gaussian, SigmaSet, kalman_update, sigma_points
from coopaoa.geometry import (
    AoAPair,
    VehicleState,
    in_fov,
    measure_pair,
    simulate_measurement,
    wrap_angle,
)
from coopaoa.metrics import direction_rmse, error_cdf, position_rmse
from coopaoa.plbp import RunConfig, RunResult, complexity_estimate, linearized_graph, run_plbp
from coopaoa.scenario import Scenario, ScenarioParams, build_graph, generate_scenario
from coopaoa.slr import LinearModel, correct_sigma_angles, slr_linearize

__all__ = [
    "AoAPair",
    "Gaussian",
    "LinearModel",
    "RunConfig",
    "RunResult",
    "Scenario",
    "ScenarioParams",
    "SigmaSet",
    "VehicleState",
    "build_graph",
    "complexity_estimate",
    "correct_sigma_angles",
    "direction_rmse",
    "error_cdf",
    "generate_scenario",
    "in_fov",
    "kalman_update",
    "measure_pair",
    "position_rmse",
    "run_plbp",
    "linearized_graph",
    "sigma_points",
    "simulate_measurement",
    "slr_linearize",
    "wrap_angle",
]
