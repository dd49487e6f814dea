"""Placement optimization for multi-waveguide pinching-antenna downlinks."""

from pinchopt.model import (
    Assignment,
    ChannelMatrix,
    Scenario,
    SystemConfig,
    assign_users,
    effective_channels,
    sinr_and_rates,
)
from pinchopt.projection import is_feasible, project_alg1, project_exact
from pinchopt.fp_solver import PgaSettings, SolveReport, solve
from pinchopt.baselines import place_cup, place_rpcs, place_upcs

__all__ = [
    "Assignment",
    "ChannelMatrix",
    "PgaSettings",
    "Scenario",
    "SolveReport",
    "SystemConfig",
    "assign_users",
    "effective_channels",
    "is_feasible",
    "place_cup",
    "place_rpcs",
    "place_upcs",
    "project_alg1",
    "project_exact",
    "sinr_and_rates",
    "solve",
]

__version__ = "0.1.0"
