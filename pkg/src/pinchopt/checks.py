"""Numerical self-checks behind the ``gradcheck`` and ``selftest`` commands."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from pinchopt.fp_solver import (
    gradient_F,
    initial_placement,
    objective_F,
    update_gamma,
    update_zeta,
)
from pinchopt.model import Scenario, SystemConfig, assign_users, effective_channels, sinr_and_rates
from pinchopt.projection import alg1_group, exact_group, group_violation

GRADCHECK_TOL = 1e-5


def richardson_gradient(fn: Callable[[np.ndarray], float], x, h: float) -> np.ndarray:
    """Central differences at ``h`` and ``h/2`` combined to cancel the h**2 term.

    The phase of each link turns over every few millimetres, so a plain
    central difference needs either a step small enough to drown in
    rounding or this extrapolation.
    """
    x = np.asarray(x, dtype=float)

    def central(step):
        out = np.empty_like(x)
        for i in range(x.size):
            e = np.zeros_like(x)
            e[i] = step
            out[i] = (fn(x + e) - fn(x - e)) / (2 * step)
        return out

    return (4 * central(h / 2) - central(h)) / 3


def random_small_instance(rng: np.random.Generator):
    n_wg = int(rng.integers(2, 4))
    k = int(rng.integers(1, 7))
    cfg = SystemConfig(num_waveguides=n_wg)
    sc = Scenario(rng.random((k, 2)) * [cfg.waveguide_length, cfg.region_depth])
    a = assign_users(cfg, sc)
    x = initial_placement(cfg, sc, a, "random", rng)
    return cfg, sc, a, x


def gradcheck(seed: int, instances: int = 20) -> float:
    """Largest per-coordinate relative error of the analytic gradient of ``F``.

    Auxiliaries are drawn at random (not at their maximizers) so the check
    covers the general case.  Coordinates whose reference derivative is
    below 1e-8 of the instance's largest are judged on that floor instead.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        cfg, sc, a, x = random_small_instance(rng)
        gamma = rng.uniform(0, 5, x.size)
        zeta = rng.uniform(0, 1, x.size) * update_zeta(effective_channels(cfg, sc, a, x), gamma)
        omega = gradient_F(cfg, sc, a, x, gamma, zeta)

        def F(xx):
            return objective_F(effective_channels(cfg, sc, a, xx), gamma, zeta)

        fd = richardson_gradient(F, x, 1e-6 * cfg.waveguide_length)
        scale = np.max(np.abs(fd))
        if scale == 0.0:
            err = np.max(np.abs(omega))
        else:
            err = np.max(np.abs(omega - fd) / np.maximum(np.abs(fd), 1e-8 * scale))
        worst = max(worst, float(err))
    return worst


@dataclass
class FuzzReport:
    cases: int = 0
    infeasible: int = 0
    not_idempotent: int = 0
    exact_worse: int = 0


def random_projection_input(rng: np.random.Generator, x_max: float = 10.0):
    """Coordinates that may fall outside ``[0, x_max]`` and may repeat."""
    size = int(rng.integers(1, 13))
    d = float(rng.choice([0.005, 0.1, 0.2]))
    v = rng.uniform(-0.3 * x_max, 1.3 * x_max, size)
    if size > 1 and rng.random() < 0.3:
        v[rng.integers(0, size, size // 2 + 1)] = v[0]
    if rng.random() < 0.3:
        # crowd the group so the spacing constraint binds
        v = rng.uniform(v[0] - 0.2, v[0] + 0.2, size)
    return v, d


def projection_fuzz(seed: int, cases: int, x_max: float = 10.0, with_exact: bool = True) -> FuzzReport:
    rng = np.random.default_rng(seed)
    rep = FuzzReport()
    for _ in range(cases):
        v, d = random_projection_input(rng, x_max)
        p = alg1_group(v, x_max, d)
        rep.cases += 1
        if group_violation(p, x_max, d) is not None:
            rep.infeasible += 1
        if not np.array_equal(alg1_group(p, x_max, d), p):
            rep.not_idempotent += 1
        if with_exact:
            e = exact_group(v, x_max, d)
            if np.linalg.norm(e - v) > np.linalg.norm(p - v) + 1e-12:
                rep.exact_worse += 1
    return rep


@dataclass
class TightnessReport:
    instances: int = 0
    max_gap: float = 0.0
    decreases: int = 0


def fp_tightness(seed: int, instances: int) -> TightnessReport:
    """Closed-form auxiliary updates: tight at the optimum and never decreasing ``F``.

    Starting from random auxiliaries, the ``gamma`` update (with ``zeta``
    re-optimized, as ``gamma`` is only optimal jointly) and then the
    ``zeta`` update must not lower ``F``; afterwards ``F`` must equal the
    natural-log sum rate.
    """
    rng = np.random.default_rng(seed)
    rep = TightnessReport()
    for _ in range(instances):
        cfg, sc, a, x = random_small_instance(rng)
        ch = effective_channels(cfg, sc, a, x)
        g0 = rng.uniform(0, 5, x.size)
        z0 = rng.uniform(0, 2, x.size) * update_zeta(ch, g0)
        f0 = objective_F(ch, g0, z0)
        f_z = objective_F(ch, g0, update_zeta(ch, g0))
        gamma = update_gamma(ch)
        zeta = update_zeta(ch, gamma)
        f_tight = objective_F(ch, gamma, zeta)
        for before, after in ((f0, f_z), (f_z, f_tight)):
            if after < before - 1e-9 * max(abs(before), 1.0):
                rep.decreases += 1
        sinr = sinr_and_rates(ch)[0]
        nat = float(np.sum(np.log1p(sinr)))
        rep.max_gap = max(rep.max_gap, abs(f_tight - nat) / max(abs(nat), 1e-300))
        rep.instances += 1
    return rep


def selftest(seed: int = 0, scale: float = 1.0) -> List[tuple]:
    """Reduced invariant suites; returns ``(name, passed, detail)`` rows."""
    rows = []
    g = gradcheck(seed, 20)
    rows.append(("gradient", g < GRADCHECK_TOL, f"max relative error {g:.3e}"))
    fz = projection_fuzz(seed, max(1, int(2000 * scale)))
    rows.append(("projection", fz.infeasible == 0 and fz.not_idempotent == 0 and fz.exact_worse == 0,
                 f"{fz.cases} cases, {fz.infeasible} infeasible, {fz.not_idempotent} not idempotent, "
                 f"{fz.exact_worse} exact worse"))
    t = fp_tightness(seed, max(1, int(200 * scale)))
    rows.append(("fp-updates", t.max_gap < 1e-9 and t.decreases == 0,
                 f"{t.instances} instances, max gap {t.max_gap:.2e}, {t.decreases} decreases"))
    return rows
