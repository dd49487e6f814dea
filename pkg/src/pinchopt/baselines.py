"""Geometric placement baselines.

CUP
    users' own x-coordinates, made feasible by the pairwise projection.
UPCS
    a fixed grid of pre-placed antennas (0.1 m pitch by default); each user
    activates the nearest free grid antenna.
RPCS
    ``M = K`` antennas per waveguide drawn uniformly from the spacing-feasible
    set; each user activates the nearest free one.

In the two selection schemes users claim antennas one at a time in
ascending x (ties by user index), so no antenna is activated twice.
"""

from __future__ import annotations

import enum
from typing import Tuple

import numpy as np

from pinchopt.model import Assignment, Scenario, SystemConfig
from pinchopt.projection import is_feasible, project_alg1, sample_feasible_uniform


class BaselineKind(str, enum.Enum):
    CUP = "CUP"
    UPCS = "UPCS"
    RPCS = "RPCS"


def place_cup(config: SystemConfig, scenario: Scenario, assignment: Assignment) -> np.ndarray:
    return project_alg1(scenario.x, assignment.groups, config)


def claim_nearest(user_x: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    """Greedy distinct nearest-candidate selection.

    Users are served in ascending x; each takes the closest unclaimed
    candidate, the lower-indexed one on an exact tie.  ``candidates`` must
    be ascending so that index order matches coordinate order.
    """
    user_x = np.asarray(user_x, dtype=float)
    if user_x.size > candidates.size:
        raise ValueError(f"{user_x.size} users but only {candidates.size} candidate antennas")
    free = np.ones(candidates.size, dtype=bool)
    chosen = np.empty(user_x.size)
    for u in np.argsort(user_x, kind="stable"):
        dist = np.where(free, np.abs(candidates - user_x[u]), np.inf)
        c = int(np.argmin(dist))
        free[c] = False
        chosen[u] = candidates[c]
    return chosen


def upcs_grid(config: SystemConfig, grid_spacing: float = 0.1) -> np.ndarray:
    if grid_spacing <= 0:
        raise ValueError("grid_spacing must be positive")
    count = int(np.floor(config.waveguide_length / grid_spacing + 1e-9)) + 1
    return np.arange(count) * grid_spacing


def place_upcs(config: SystemConfig, scenario: Scenario, assignment: Assignment,
               grid_spacing: float = 0.1, with_flag: bool = False):
    """Nearest free grid antenna per user.

    When ``d_min`` exceeds the grid pitch the selection may violate the
    spacing constraint; a final pairwise projection then restores
    feasibility.  With ``with_flag`` the return value is ``(x, projected)``.
    """
    grid = upcs_grid(config, grid_spacing)
    x = np.empty(scenario.num_users)
    for g in assignment.groups:
        if len(g):
            x[g] = claim_nearest(scenario.x[g], grid)
    projected = not is_feasible(x, assignment.groups, config)[0]
    if projected:
        x = project_alg1(x, assignment.groups, config)
    return (x, projected) if with_flag else x


def rpcs_antenna_count(config: SystemConfig, num_users: int) -> Tuple[int, bool]:
    """Pre-placed antennas per waveguide and whether the physical cap bound."""
    cap = config.max_group_size()
    return min(num_users, cap), num_users > cap


def place_rpcs(config: SystemConfig, scenario: Scenario, assignment: Assignment,
               rng: np.random.Generator, num_antennas: int = None) -> np.ndarray:
    """Nearest free antenna among a random feasible pre-placement per waveguide.

    ``num_antennas`` defaults to the number of users, capped at what a
    waveguide can physically hold.
    """
    if num_antennas is None:
        num_antennas, _ = rpcs_antenna_count(config, scenario.num_users)
    x = np.empty(scenario.num_users)
    for g in assignment.groups:
        if len(g) > num_antennas:
            raise ValueError(f"waveguide serves {len(g)} users but holds {num_antennas} antennas")
        # draw even for empty waveguides so streams do not depend on the assignment
        pre = sample_feasible_uniform(rng, num_antennas, config.waveguide_length, config.min_spacing)
        if len(g):
            x[g] = claim_nearest(scenario.x[g], pre)
    return x
