"""Monte-Carlo comparison of the FP solver against the geometric baselines.

Every trial owns a randomness stream keyed by ``(master_seed, trial)``, so
results do not depend on the order in which trials run or on how many
worker processes run them.  Trial ``i`` sees the same user drop at every
sweep point; the first ``K`` users of a larger ``K`` coincide with those of
a smaller one.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from pinchopt.baselines import place_cup, place_rpcs, place_upcs, rpcs_antenna_count
from pinchopt.fp_solver import PgaSettings, solve
from pinchopt.model import Scenario, SystemConfig, assign_users, effective_channels, sinr_and_rates

log = logging.getLogger(__name__)

SCHEMES = ("FP", "CUP", "UPCS", "RPCS")
CSV_COLUMNS = ("scheme", "N", "K", "d_min", "trial", "rate_bits", "outer_iters", "ms")
HALF_WAVELENGTH = "lambda/2"

# stream tags under a trial seed
_USERS, _RPCS, _INIT = 0, 1, 2


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


def fmt(value: float) -> str:
    return format(float(value), ".17g")


def stream(seed: int, tag: int = _USERS) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, tag)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(tag,))))


def trial_seed(master_seed: int, trial: int) -> int:
    ss = np.random.SeedSequence(master_seed, spawn_key=(trial,))
    return int(ss.generate_state(1, np.uint64)[0])


def generate_scenario(config: SystemConfig, num_users: int, seed: int) -> Scenario:
    """Users uniform on ``[0, x_max] x [0, y_max]``."""
    if num_users < 1:
        raise ValueError("num_users must be >= 1")
    u = stream(seed, _USERS).random((num_users, 2))
    return Scenario(u * [config.waveguide_length, config.region_depth], rng_seed=seed)


def resolve_dmin(value: Union[str, float], config: SystemConfig) -> float:
    if isinstance(value, str):
        text = value.strip().lower()
        if text in (HALF_WAVELENGTH, "lambda/2", "λ/2", "half-wavelength"):
            return config.wavelength / 2
        try:
            value = float(text)
        except ValueError:
            raise ConfigError(f"cannot parse d_min {value!r}") from None
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise ConfigError(f"d_min must be positive, got {value}")
    return value


@dataclass
class ExperimentSpec:
    config: SystemConfig = field(default_factory=SystemConfig)
    ks: List[int] = field(default_factory=lambda: [50])
    ns: List[int] = field(default_factory=lambda: [6])
    dmins: List[Union[str, float]] = field(default_factory=lambda: [0.1])
    trials: int = 100
    seed: int = 0
    schemes: List[str] = field(default_factory=lambda: list(SCHEMES))
    settings: PgaSettings = field(default_factory=PgaSettings)
    upcs_spacing: float = 0.1
    init_mode: str = "cup"
    out: Optional[str] = None
    aggregates_out: Optional[str] = None
    threads: int = 1

    def validate(self) -> None:
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigError(f"trials must be a positive integer, got {self.trials}")
        if not self.ks or any(int(k) != k or k < 1 for k in self.ks):
            raise ConfigError(f"ks must be positive integers, got {self.ks}")
        if not self.ns or any(int(n) != n or n < 2 for n in self.ns):
            raise ConfigError(f"ns must be integers >= 2, got {self.ns}")
        if not self.dmins:
            raise ConfigError("dmins must not be empty")
        for d in self.dmins:
            resolve_dmin(d, self.config)
        unknown = [s for s in self.schemes if s not in SCHEMES]
        if unknown or not self.schemes:
            raise ConfigError(f"schemes must be drawn from {SCHEMES}, got {self.schemes}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.init_mode not in ("cup", "random"):
            raise ConfigError(f"init_mode must be 'cup' or 'random', got {self.init_mode!r}")
        if self.upcs_spacing <= 0:
            raise ConfigError("upcs_spacing must be positive")

    def sweep_points(self) -> Tuple[List[Tuple[int, int, float]], List[dict]]:
        """Feasible ``(N, K, d_min)`` points and the skipped ones with a reason."""
        points, skipped = [], []
        for n, k, d in product(self.ns, self.ks, self.dmins):
            dmin = resolve_dmin(d, self.config)
            if self.config.waveguide_length < (k - 1) * dmin:
                skipped.append({"N": n, "K": k, "d_min": dmin,
                                "reason": "waveguide_length < (K-1)*d_min"})
                continue
            points.append((int(n), int(k), dmin))
        return points, skipped

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        data = dict(data)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown experiment fields: {sorted(unknown)}")
        try:
            if "config" in data:
                data["config"] = SystemConfig.from_dict(data["config"])
            if "settings" in data:
                data["settings"] = PgaSettings(**data["settings"])
            spec = cls(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        return spec

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["config"] = self.config.to_dict()
        out["settings"] = dataclasses.asdict(self.settings)
        return out


@dataclass(frozen=True)
class TrialResult:
    scheme: str
    N: int
    K: int
    d_min: float
    trial: int
    rate_bits: float
    outer_iters: int
    ms: float
    cap_violations: int = 0
    projected: bool = False

    def row(self) -> list:
        return [self.scheme, self.N, self.K, fmt(self.d_min), self.trial,
                fmt(self.rate_bits), self.outer_iters, fmt(self.ms)]


def sinr_cap_violations(sinr: np.ndarray, co_served: np.ndarray, tol: float = 1e-9) -> int:
    """Users whose SINR exceeds ``1/q`` with ``q >= 1`` co-served users."""
    capped = co_served >= 1
    return int(np.sum(sinr[capped] > 1.0 / co_served[capped] + tol))


def run_trial(spec: ExperimentSpec, point: Tuple[int, int, float], trial: int) -> List[TrialResult]:
    """Evaluate every requested scheme on one user drop."""
    n_wg, k, dmin = point
    config = spec.config.replace(num_waveguides=n_wg, min_spacing=dmin)
    seed = trial_seed(spec.seed, trial)
    scenario = generate_scenario(config, k, seed)
    assignment = assign_users(config, scenario)
    q = assignment.co_served()
    results = []
    for scheme in spec.schemes:
        started = time.perf_counter()
        outer, projected = 0, False
        if scheme == "FP":
            report = solve(config, scenario, spec.settings, spec.init_mode,
                           rng=stream(seed, _INIT), assignment=assignment)
            x, outer = report.placement, report.outer_iterations
        elif scheme == "CUP":
            x = place_cup(config, scenario, assignment)
        elif scheme == "UPCS":
            x, projected = place_upcs(config, scenario, assignment, spec.upcs_spacing, with_flag=True)
        else:
            x = place_rpcs(config, scenario, assignment, stream(seed, _RPCS))
            projected = rpcs_antenna_count(config, k)[1]
        sinr, _, rate = sinr_and_rates(effective_channels(config, scenario, assignment, x))
        elapsed = 1e3 * (time.perf_counter() - started)
        if not math.isfinite(rate) or rate < 0:
            raise FloatingPointError(f"{scheme} produced rate {rate}")
        results.append(TrialResult(scheme, n_wg, k, dmin, trial, rate, outer, elapsed,
                                   sinr_cap_violations(sinr, q), projected))
    return results


def _run_task(args):
    spec, point, trial = args
    try:
        return run_trial(spec, point, trial), None
    except Exception as exc:  # recorded per trial, not fatal
        n_wg, k, dmin = point
        return [], {"N": n_wg, "K": k, "d_min": dmin, "trial": trial,
                    "error": f"{type(exc).__name__}: {exc}"}


@dataclass
class ExperimentResult:
    trials: List[TrialResult]
    aggregates: List[dict]
    failures: List[dict]
    skipped: List[dict]

    def csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for t in self.trials:
            writer.writerow(t.row())
        return buf.getvalue()

    def aggregates_csv_text(self) -> str:
        buf = io.StringIO()
        cols = ["scheme", "N", "K", "d_min", "trials", "mean_rate", "stderr",
                "mean_outer_iters", "mean_ms", "cap_violations"]
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(cols)
        for a in self.aggregates:
            writer.writerow([a["scheme"], a["N"], a["K"], fmt(a["d_min"]), a["trials"],
                             fmt(a["mean_rate"]), fmt(a["stderr"]), fmt(a["mean_outer_iters"]),
                             fmt(a["mean_ms"]), a["cap_violations"]])
        return buf.getvalue()

    def mean_rate(self, scheme: str, **point) -> float:
        for a in self.aggregates:
            if a["scheme"] == scheme and all(a[k] == v for k, v in point.items()):
                return a["mean_rate"]
        raise KeyError((scheme, point))


def aggregate(trials: Sequence[TrialResult], scheme_order: Sequence[str]) -> List[dict]:
    groups: Dict[tuple, List[TrialResult]] = {}
    for t in trials:
        groups.setdefault((t.scheme, t.N, t.K, t.d_min), []).append(t)
    rank = {s: i for i, s in enumerate(scheme_order)}
    out = []
    for key in sorted(groups, key=lambda g: (rank[g[0]], g[1], g[2], g[3])):
        rows = groups[key]
        rates = np.array([r.rate_bits for r in rows])
        stderr = float(np.std(rates, ddof=1) / np.sqrt(rates.size)) if rates.size > 1 else 0.0
        out.append({
            "scheme": key[0], "N": key[1], "K": key[2], "d_min": key[3],
            "trials": len(rows),
            "mean_rate": float(np.mean(rates)),
            "stderr": stderr,
            "mean_outer_iters": float(np.mean([r.outer_iters for r in rows])),
            "mean_ms": float(np.mean([r.ms for r in rows])),
            "cap_violations": int(sum(r.cap_violations for r in rows)),
        })
    return out


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    """Run every sweep point and trial; optionally write the CSV outputs."""
    spec.validate()
    points, skipped = spec.sweep_points()
    for s in skipped:
        log.warning("skipping N=%(N)s K=%(K)s d_min=%(d_min)s: %(reason)s", s)
    tasks = [(spec, p, i) for p in points for i in range(spec.trials)]
    if spec.threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=spec.threads) as pool:
            outcomes = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (8 * spec.threads))))
    else:
        outcomes = [_run_task(t) for t in tasks]

    rank = {s: i for i, s in enumerate(spec.schemes)}
    trials = sorted((r for rows, _ in outcomes for r in rows),
                    key=lambda r: (rank[r.scheme], r.N, r.K, r.d_min, r.trial))
    failures = [f for _, f in outcomes if f is not None]
    for f in failures:
        log.error("trial failed: %s", f)
    result = ExperimentResult(trials, aggregate(trials, spec.schemes), failures, skipped)
    if spec.out:
        with open(spec.out, "w", newline="") as fh:
            fh.write(result.csv_text())
    if spec.aggregates_out:
        with open(spec.aggregates_out, "w", newline="") as fh:
            fh.write(result.aggregates_csv_text())
    return result


@dataclass
class ConvergenceRun:
    """Rate traces, shape ``(trials, t_max + 1)`` per d_min, column 0 initial."""

    traces: Dict[float, np.ndarray]
    placements_checked: int = 0
    cap_violations: int = 0


def convergence_traces(config: SystemConfig, num_users: int, dmins: Sequence[float], trials: int,
                       master_seed: int, settings: Optional[PgaSettings] = None,
                       init_mode: str = "cup") -> ConvergenceRun:
    """Per-outer-iteration mean-rate traces for each d_min.

    The outer tolerance is disabled so every trace runs to ``t_max``.  The
    SINR cap is checked on every traced placement.
    """
    settings = dataclasses.replace(settings or PgaSettings(), outer_tol=0.0)
    run = ConvergenceRun(traces={})
    for d in dmins:
        cfg = config.replace(min_spacing=float(d))
        rows = []
        for i in range(trials):
            seed = trial_seed(master_seed, i)
            sc = generate_scenario(cfg, num_users, seed)
            assignment = assign_users(cfg, sc)
            q = assignment.co_served()

            def check(t, x, channels):
                run.placements_checked += 1
                run.cap_violations += sinr_cap_violations(sinr_and_rates(channels)[0], q)

            rep = solve(cfg, sc, settings, init_mode, rng=stream(seed, _INIT),
                        assignment=assignment, callback=check)
            rows.append([rep.initial_rate] + rep.rate_trace)
        run.traces[float(d)] = np.array(rows)
    return run


def traces_csv_text(dmin: float, trace: np.ndarray) -> str:
    """Long-format trace table; ``t = 0`` is the initial placement."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["d_min", "trial", "t", "rate_bits"])
    for i, row in enumerate(trace):
        for t, r in enumerate(row):
            writer.writerow([fmt(dmin), i, t, fmt(r)])
    return buf.getvalue()


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, default=_json_default)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
