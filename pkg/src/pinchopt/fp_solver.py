"""Fractional-programming solver for antenna placement.

The mean rate is a sum of ``log(1 + A_k / B_k)`` terms.  A Lagrangian dual
transform (auxiliary ``gamma``) moves the ratio out of the logarithm and a
quadratic transform (auxiliary ``zeta``) splits the remaining ratio, which
leaves an objective ``F(x, gamma, zeta)`` whose auxiliaries have closed-form
maximizers.  The outer loop refreshes them; the inner loop runs projected
gradient ascent on the antenna coordinates with a diminishing step.

Objectives are in nats, reported rates in bits/s/Hz.  By default the
ascent follows ``F / K``, the surrogate of the mean per-user rate that the
placement problem maximizes; with the plain sum the diminishing step
schedule overshoots the millimetre-scale phase structure by orders of
magnitude.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from pinchopt.model import (
    Assignment,
    ChannelMatrix,
    Scenario,
    SystemConfig,
    assign_users,
    distances,
    effective_channels,
    link_gains,
    sinr_and_rates,
    waveguide_sums,
)
from pinchopt.projection import PROJECTIONS, is_feasible, sample_feasible_uniform

# floor for the desired-signal power inside A**-0.5 (W)
SIGNAL_FLOOR = 1e-30


@dataclass(frozen=True)
class PgaSettings:
    """Step-size schedule, iteration caps and stopping thresholds."""

    step_base: float = 0.01
    step_exponent: float = 0.6
    tau_max: int = 100
    t_max: int = 10
    outer_tol: float = 1e-4
    inner_tol: float = 1e-7
    projection: str = "alg1"
    mean_objective: bool = True

    def __post_init__(self):
        if self.step_base <= 0:
            raise ValueError("step_base must be positive")
        if not 0 < self.step_exponent <= 1:
            raise ValueError("step_exponent must lie in (0, 1]")
        if self.tau_max < 1 or self.t_max < 1:
            raise ValueError("iteration caps must be >= 1")
        if self.outer_tol < 0 or self.inner_tol < 0:
            raise ValueError("tolerances must be nonnegative")
        if self.projection not in PROJECTIONS:
            raise ValueError(f"projection must be one of {sorted(PROJECTIONS)}")


@dataclass(frozen=True)
class FpState:
    gamma: np.ndarray
    zeta: np.ndarray


@dataclass
class SolveReport:
    placement: np.ndarray
    sinr: np.ndarray
    rates: np.ndarray
    mean_rate: float
    initial_rate: float
    rate_trace: List[float] = field(default_factory=list)
    objective_trace: List[float] = field(default_factory=list)
    inner_iterations: List[int] = field(default_factory=list)
    outer_iterations: int = 0
    wall_ms: float = 0.0
    state: Optional[FpState] = None

    def to_dict(self) -> dict:
        return {
            "placement": self.placement.tolist(),
            "sinr": self.sinr.tolist(),
            "rates": self.rates.tolist(),
            "mean_rate": self.mean_rate,
            "initial_rate": self.initial_rate,
            "rate_trace": list(self.rate_trace),
            "objective_trace": list(self.objective_trace),
            "inner_iterations": list(self.inner_iterations),
            "outer_iterations": self.outer_iterations,
            "wall_ms": self.wall_ms,
        }


def objective_f(channels: ChannelMatrix, gamma) -> float:
    a, b = channels.signal, channels.interference
    gamma = np.asarray(gamma, dtype=float)
    return float(np.sum(np.log1p(gamma) - gamma + (1.0 + gamma) * a / (a + b)))


def objective_F(channels: ChannelMatrix, gamma, zeta) -> float:
    a, b = channels.signal, channels.interference
    gamma = np.asarray(gamma, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    terms = (np.log1p(gamma) - gamma + 2.0 * zeta * np.sqrt((1.0 + gamma) * a)
             - zeta ** 2 * (a + b))
    return float(np.sum(terms))


def update_gamma(channels: ChannelMatrix) -> np.ndarray:
    return channels.signal / channels.interference


def update_zeta(channels: ChannelMatrix, gamma) -> np.ndarray:
    a, b = channels.signal, channels.interference
    return np.sqrt((1.0 + np.asarray(gamma, dtype=float)) * a) / (a + b)


def gradient_F(config: SystemConfig, scenario: Scenario, assignment: Assignment,
               x, gamma, zeta) -> np.ndarray:
    """Analytic gradient of ``F`` with respect to the antenna coordinates.

    With ``T[a, k] = 2P Re(conj(S[n_a, k]) dG[a, k]/dx_a)``, where ``S`` is the
    coherent per-waveguide sum, ``dA_k/dx_a = T[a, k]`` when antenna ``a``
    sits on user ``k``'s waveguide, and ``d(A_k + B_k)/dx_a`` is ``T[a, k]``
    times the group size of ``a``'s waveguide (every user of that group sees
    the same sum).  ``F``'s weights on these are
    ``zeta_k sqrt(1 + gamma_k) / sqrt(A_k)`` and ``-zeta_k**2``.
    """
    x = np.asarray(x, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    lam = config.wavelength
    serving = assignment.serving

    r = distances(config, scenario, assignment, x)
    gains = link_gains(config, scenario, assignment, x, r)
    sums = waveguide_sums(assignment, gains, config.num_waveguides)

    dr = (x[:, None] - scenario.x[None, :]) / r
    dgains = gains * ((-2j * np.pi / lam - 1.0 / r) * dr - 2j * np.pi * config.n_eff / lam)
    t = 2.0 * config.tx_power_per_user * np.real(np.conj(sums[serving]) * dgains)

    a = config.tx_power_per_user * np.abs(sums[serving, np.arange(x.size)]) ** 2
    signal_weight = zeta * np.sqrt(1.0 + gamma) / np.sqrt(np.maximum(a, SIGNAL_FLOOR))
    same = serving[:, None] == serving[None, :]
    sizes = assignment.group_sizes()[serving]
    weights = np.where(same, signal_weight[None, :], 0.0) - sizes[:, None] * zeta[None, :] ** 2
    return np.sum(t * weights, axis=1)


def step_size(tau: int, t: int, settings: PgaSettings) -> float:
    """Diminishing step; ``tau`` and ``t`` both count from 1."""
    return settings.step_base / (tau + settings.tau_max * (t - 1)) ** settings.step_exponent


def pga_inner_loop(config: SystemConfig, scenario: Scenario, assignment: Assignment,
                   x0, gamma, zeta, settings: PgaSettings, t: int):
    """Projected gradient ascent on ``F`` with fixed auxiliaries.

    Returns ``(x, iterations)``.
    """
    project = PROJECTIONS[settings.projection]
    x = np.asarray(x0, dtype=float).copy()
    threshold = settings.inner_tol * config.waveguide_length
    scale = 1.0 / x.size if settings.mean_objective else 1.0
    tau = 0
    for tau in range(1, settings.tau_max + 1):
        omega = scale * gradient_F(config, scenario, assignment, x, gamma, zeta)
        if not np.all(np.isfinite(omega)):
            raise FloatingPointError(f"non-finite gradient at inner iteration {tau}, outer {t}")
        x_new = project(x + omega * step_size(tau, t, settings), assignment.groups, config)
        moved = np.max(np.abs(x_new - x)) if x.size else 0.0
        x = x_new
        if moved < threshold:
            break
    return x, tau


def initial_placement(config: SystemConfig, scenario: Scenario, assignment: Assignment,
                      init_mode: str = "cup", rng: Optional[np.random.Generator] = None,
                      projection: str = "alg1") -> np.ndarray:
    if init_mode == "cup":
        return PROJECTIONS[projection](scenario.x, assignment.groups, config)
    if init_mode == "random":
        if rng is None:
            rng = np.random.default_rng(scenario.rng_seed)
        x = np.empty(scenario.num_users)
        for g in assignment.groups:
            if len(g):
                x[g] = rng.permutation(sample_feasible_uniform(
                    rng, len(g), config.waveguide_length, config.min_spacing))
        return x
    raise ValueError(f"unknown init_mode {init_mode!r}")


def solve(config: SystemConfig, scenario: Scenario, settings: Optional[PgaSettings] = None,
          init_mode: str = "cup", rng: Optional[np.random.Generator] = None,
          assignment: Optional[Assignment] = None, x0=None,
          callback: Optional[Callable[[int, np.ndarray, ChannelMatrix], None]] = None) -> SolveReport:
    """Run the FP outer loop with projected-gradient inner loops.

    Each outer iteration sets ``gamma`` and ``zeta`` to their maximizers at
    the current placement, then runs up to ``tau_max`` PGA steps.  Stops
    after ``t_max`` outer iterations or once the relative change of the
    tight objective (the sum rate in nats) drops below ``outer_tol``.
    ``callback(t, x, channels)`` sees the placement after every outer
    iteration, with ``t = 0`` for the initial one.
    """
    settings = settings or PgaSettings()
    started = time.perf_counter()
    scenario.validate(config)
    if assignment is None:
        assignment = assign_users(config, scenario)
    if x0 is None:
        x = initial_placement(config, scenario, assignment, init_mode, rng, settings.projection)
    else:
        x = np.asarray(x0, dtype=float).copy()
        ok, reason = is_feasible(x, assignment.groups, config)
        if not ok:
            raise ValueError(f"initial placement infeasible: {reason}")

    channels = effective_channels(config, scenario, assignment, x)
    _, _, initial_rate = sinr_and_rates(channels)
    if callback is not None:
        callback(0, x, channels)
    gamma = update_gamma(channels)
    zeta = update_zeta(channels, gamma)
    tight = objective_F(channels, gamma, zeta)

    report = SolveReport(placement=x, sinr=np.empty(0), rates=np.empty(0),
                         mean_rate=initial_rate, initial_rate=initial_rate)
    for t in range(1, settings.t_max + 1):
        x, inner = pga_inner_loop(config, scenario, assignment, x, gamma, zeta, settings, t)
        channels = effective_channels(config, scenario, assignment, x)
        report.objective_trace.append(objective_F(channels, gamma, zeta))
        gamma = update_gamma(channels)
        zeta = update_zeta(channels, gamma)
        previous, tight = tight, objective_F(channels, gamma, zeta)
        if not np.isfinite(tight):
            raise FloatingPointError(f"non-finite objective at outer iteration {t}")
        report.rate_trace.append(sinr_and_rates(channels)[2])
        report.inner_iterations.append(inner)
        report.outer_iterations = t
        if callback is not None:
            callback(t, x, channels)
        if abs(tight - previous) <= settings.outer_tol * abs(previous):
            break

    sinr, rates, rate = sinr_and_rates(channels)
    report.placement = x
    report.sinr = sinr
    report.rates = rates
    report.mean_rate = rate
    report.state = FpState(gamma=gamma, zeta=zeta)
    report.wall_ms = 1e3 * (time.perf_counter() - started)
    return report
