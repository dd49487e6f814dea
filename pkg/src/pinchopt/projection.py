"""Feasible set of antenna placements and projections onto it.

On each waveguide the active antennas must lie in ``[0, x_max]`` and be at
least ``d_min`` apart.  Waveguides are independent, so every routine here
works group by group; the placement-level wrappers take the per-waveguide
index groups of an :class:`~pinchopt.model.Assignment`.

Two projections are provided.  :func:`alg1_group` is the pairwise
outside-in procedure used by the solver.  :func:`exact_group` computes the
true Euclidean projection via isotonic regression and serves as its audit:
the pairwise procedure is not always the nearest feasible point (input
``[0.5, 0.5]`` with ``d_min = 0.2`` gives ``[0.3, 0.5]``, while the nearest
point is ``[0.4, 0.6]``).
"""

from __future__ import annotations

from typing import Optional, Sequence, Tuple

import numpy as np

from pinchopt.model import SystemConfig

FEAS_TOL = 1e-12


class InfeasibleGroupError(ValueError):
    """Raised when a waveguide cannot host its antennas under C1/C2."""


def check_group_spec(size: int, x_max: float, d_min: float) -> None:
    if size >= 2 and (size - 1) * d_min > x_max * (1.0 + 1e-12):
        raise InfeasibleGroupError(
            f"{size} antennas need {(size - 1) * d_min:.6g} m but the waveguide is {x_max:.6g} m long"
        )


def sort_permutation(values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Stable ascending sort order and its inverse."""
    order = np.argsort(values, kind="stable")
    inverse = np.empty_like(order)
    inverse[order] = np.arange(order.size)
    return order, inverse


def group_violation(values, x_max: float, d_min: float, tol: float = FEAS_TOL) -> Optional[str]:
    """Describe the first violated constraint of one group, or ``None``."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        return None
    if not np.all(np.isfinite(v)):
        return "C1: non-finite coordinate"
    if v[0] < -tol:
        return f"C1: coordinate {v[0]!r} below 0"
    if v[-1] > x_max + tol:
        return f"C1: coordinate {v[-1]!r} above x_max={x_max!r}"
    gaps = np.diff(v)
    if gaps.size and gaps.min() < d_min - tol:
        i = int(np.argmin(gaps))
        return f"C2: gap {gaps[i]!r} between {v[i]!r} and {v[i + 1]!r} below d_min={d_min!r}"
    return None


def is_feasible(x, groups: Sequence[np.ndarray], config: SystemConfig,
                tol: float = FEAS_TOL) -> Tuple[bool, Optional[str]]:
    """Check C1 and C2 for a flat placement.

    Returns ``(ok, reason)`` where ``reason`` names the first violated
    constraint (prefixed with the waveguide index) or is ``None``.
    """
    x = np.asarray(x, dtype=float)
    for n, g in enumerate(groups):
        reason = group_violation(x[g], config.waveguide_length, config.min_spacing, tol)
        if reason is not None:
            return False, f"waveguide {n}: {reason}"
    return True, None


def pairwise_conditions_hold(values, x_max: float, d_min: float, tol: float = FEAS_TOL) -> bool:
    """Sorted-order bounds, adjacent gaps and outer-pair span conditions together."""
    v = np.sort(np.asarray(values, dtype=float))
    m = v.size
    if m == 0:
        return True
    ordered = v[0] >= -tol and v[-1] <= x_max + tol
    adjacent = bool(np.all(np.diff(v) >= d_min - tol))
    half = (m + 1) // 2
    lo = np.arange(half)
    hi = m - 1 - lo
    spans = bool(np.all(v[hi] - v[lo] >= (hi - lo) * d_min - tol * np.maximum(hi - lo, 1)))
    return bool(ordered and adjacent and spans)


def alg1_group(values, x_max: float, d_min: float) -> np.ndarray:
    """Pairwise outside-in projection of one waveguide's coordinates.

    Antennas are stable-sorted and processed in pairs (smallest, largest),
    then the next pair inwards.  Each pair is clamped into the current
    window ``[x_low, x_up]``; if its span is short of ``(j - m) * d_min``
    the lower antenna moves down, and whatever does not fit above
    ``x_low`` pushes the upper antenna up.  The window then shrinks by
    ``d_min`` on both sides.  The middle antenna of an odd group is only
    clamped into the window.
    """
    v = np.asarray(values, dtype=float)
    size = v.size
    check_group_spec(size, x_max, d_min)
    if size == 0:
        return v.copy()
    order, inverse = sort_permutation(v)
    s = v[order]
    out = np.empty(size)
    x_low, x_up = 0.0, float(x_max)
    # comparisons carry the per-gap slack of group_violation, so anything
    # that passes the feasibility check is returned bit-for-bit
    for m in range((size + 1) // 2):
        j = size - 1 - m
        lower = s[m] if s[m] >= x_low - FEAS_TOL else x_low
        if m == j:
            out[m] = lower if lower <= x_up + FEAS_TOL else x_up
            break
        upper = s[j] if s[j] <= x_up + FEAS_TOL else x_up
        need = (j - m) * d_min
        if upper - lower < need - (j - m) * FEAS_TOL:
            # lower - (need - (upper - lower)) and its spill, written so the
            # result does not depend on rounding in the shortfall
            if upper - need < x_low:
                upper = x_low + need
                lower = x_low
            else:
                lower = upper - need
        out[m] = lower
        out[j] = upper
        x_low = lower + d_min
        x_up = upper - d_min
    return out[inverse]


def pool_adjacent_violators(y: np.ndarray) -> np.ndarray:
    """Least-squares nondecreasing fit with unit weights."""
    y = np.asarray(y, dtype=float)
    means, counts = [], []
    for value in y:
        means.append(value)
        counts.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            c = counts[-2] + counts[-1]
            mu = (means[-2] * counts[-2] + means[-1] * counts[-1]) / c
            means[-2:] = [mu]
            counts[-2:] = [c]
    return np.repeat(means, counts)


def exact_group(values, x_max: float, d_min: float) -> np.ndarray:
    """Euclidean projection of one group onto its feasible set.

    Sorted order is kept; shifting the i-th sorted coordinate down by
    ``i * d_min`` turns the spacing chain into a plain monotonicity
    constraint on a box, solved by isotonic regression followed by clipping.
    """
    v = np.asarray(values, dtype=float)
    size = v.size
    check_group_spec(size, x_max, d_min)
    if size == 0:
        return v.copy()
    order, inverse = sort_permutation(v)
    offsets = np.arange(size) * d_min
    upper = max(x_max - (size - 1) * d_min, 0.0)
    z = np.clip(pool_adjacent_violators(v[order] - offsets), 0.0, upper)
    return (z + offsets)[inverse]


def _project(x, groups, config: SystemConfig, group_fn) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = x.copy()
    for g in groups:
        if len(g):
            out[g] = group_fn(x[g], config.waveguide_length, config.min_spacing)
    return out


def project_alg1(x, groups: Sequence[np.ndarray], config: SystemConfig) -> np.ndarray:
    """Apply :func:`alg1_group` to every waveguide of a flat placement."""
    return _project(x, groups, config, alg1_group)


def project_exact(x, groups: Sequence[np.ndarray], config: SystemConfig) -> np.ndarray:
    """Apply :func:`exact_group` to every waveguide of a flat placement."""
    return _project(x, groups, config, exact_group)


PROJECTIONS = {"alg1": project_alg1, "exact": project_exact}
GROUP_PROJECTIONS = {"alg1": alg1_group, "exact": exact_group}


def sample_feasible_uniform(rng: np.random.Generator, size: int, x_max: float,
                            d_min: float) -> np.ndarray:
    """Draw an ascending group uniformly from the ordered feasible set.

    Sorted uniforms on the reduced interval ``[0, x_max - (size-1) d_min]``,
    with ``i * d_min`` added to the i-th, are uniform on the set.
    """
    check_group_spec(size, x_max, d_min)
    reduced = max(x_max - (size - 1) * d_min, 0.0)
    z = np.sort(rng.uniform(0.0, reduced, size=size))
    return z + np.arange(size) * d_min
