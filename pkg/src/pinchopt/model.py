"""System model of a downlink multi-waveguide pinching-antenna system.

Waveguides run parallel to the x-axis at a common height above the user
plane and are fed at ``x = 0``.  Each user is served by its closest
waveguide, and every served user owns exactly one active antenna on that
waveguide.  A placement is therefore a length-K float array whose entry
``i`` is the x-coordinate of user ``i``'s antenna; which waveguide carries
that antenna follows from the :class:`Assignment`.

Waveguide indices are zero-based throughout.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """Physical and geometric constants of the system.

    Defaults reproduce the reference simulation setting: 28 GHz carrier,
    a 10 m x 10 m service region, waveguides 3 m above the users, unit
    per-user transmit power and -90 dBm noise.
    """

    num_waveguides: int = 6
    waveguide_length: float = 10.0
    region_depth: float = 10.0
    height: float = 3.0
    carrier_freq: float = 28e9
    n_eff: float = 1.4
    tx_power_per_user: float = 1.0
    noise_power: float = field(default_factory=lambda: dbm_to_watts(-90.0))
    min_spacing: float = 0.1

    def __post_init__(self):
        if int(self.num_waveguides) != self.num_waveguides or self.num_waveguides < 2:
            raise ValueError(f"num_waveguides must be an integer >= 2, got {self.num_waveguides}")
        for name in ("waveguide_length", "region_depth", "height", "carrier_freq",
                     "n_eff", "tx_power_per_user", "noise_power", "min_spacing"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be positive and finite, got {value}")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq

    @property
    def waveguide_ys(self) -> np.ndarray:
        n = np.arange(self.num_waveguides)
        return n * self.region_depth / (self.num_waveguides - 1)

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def max_group_size(self) -> int:
        """Largest number of antennas one waveguide can hold under C1/C2."""
        return int(np.floor(self.waveguide_length / self.min_spacing + 1e-9)) + 1

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SystemConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown SystemConfig fields: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class Scenario:
    """K user positions on the ground plane, shape ``(K, 2)``."""

    users: np.ndarray
    rng_seed: Optional[int] = None

    def __post_init__(self):
        users = np.array(self.users, dtype=float, copy=True).reshape(-1, 2)
        if users.shape[0] < 1:
            raise ValueError("a scenario needs at least one user")
        users.setflags(write=False)
        object.__setattr__(self, "users", users)

    @property
    def num_users(self) -> int:
        return self.users.shape[0]

    @property
    def x(self) -> np.ndarray:
        return self.users[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.users[:, 1]

    def validate(self, config: SystemConfig) -> None:
        if not np.all(np.isfinite(self.users)):
            raise ValueError("user positions must be finite")
        if np.any(self.x < 0) or np.any(self.x > config.waveguide_length):
            raise ValueError("user x-coordinates must lie in [0, waveguide_length]")
        if np.any(self.y < 0) or np.any(self.y > config.region_depth):
            raise ValueError("user y-coordinates must lie in [0, region_depth]")

    def permuted(self, order: Sequence[int]) -> "Scenario":
        return Scenario(self.users[np.asarray(order)], self.rng_seed)


@dataclass(frozen=True)
class Assignment:
    """Serving waveguide of every user and the resulting per-waveguide groups.

    ``groups[n]`` lists, in ascending user index, the users served by
    waveguide ``n``; it doubles as the list of active antennas on ``n``.
    """

    serving: np.ndarray
    groups: tuple

    @property
    def num_users(self) -> int:
        return self.serving.shape[0]

    def group_sizes(self) -> np.ndarray:
        return np.array([len(g) for g in self.groups], dtype=int)

    def co_served(self) -> np.ndarray:
        """Number of other users sharing each user's waveguide."""
        return self.group_sizes()[self.serving] - 1

    def split(self, x: np.ndarray) -> list:
        """Per-waveguide coordinate lists of a flat placement."""
        x = np.asarray(x, dtype=float)
        return [x[g] for g in self.groups]

    def join(self, coords: Sequence[Sequence[float]]) -> np.ndarray:
        """Inverse of :meth:`split`."""
        x = np.empty(self.num_users)
        if len(coords) != len(self.groups):
            raise ValueError("one coordinate list per waveguide is required")
        for g, c in zip(self.groups, coords):
            c = np.asarray(c, dtype=float)
            if c.shape != g.shape:
                raise ValueError(f"expected {g.size} coordinates, got {c.size}")
            x[g] = c
        return x


def waveguide_y(config: SystemConfig, n: int) -> float:
    """y-coordinate of waveguide ``n`` (``0 <= n < N``); equal spacing over [0, y_max]."""
    if not 0 <= n < config.num_waveguides:
        raise IndexError(f"waveguide index {n} outside [0, {config.num_waveguides})")
    return n * config.region_depth / (config.num_waveguides - 1)


def assign_users(config: SystemConfig, scenario: Scenario) -> Assignment:
    """Map each user to its nearest waveguide in y.

    Equidistant waveguides resolve to the lower index (``argmin`` returns the
    first minimum).
    """
    ys = config.waveguide_ys
    dist = np.abs(scenario.y[:, None] - ys[None, :])
    serving = np.argmin(dist, axis=1)
    serving.setflags(write=False)
    groups = tuple(np.flatnonzero(serving == n) for n in range(config.num_waveguides))
    return Assignment(serving=serving, groups=groups)


def inwaveguide_gain(config: SystemConfig, x_pin):
    """Phase rotation accumulated between the feed point and ``x_pin``."""
    phase = 2.0 * np.pi * config.n_eff * np.asarray(x_pin, dtype=float) / config.wavelength
    return np.exp(-1j * phase)


def freespace_gain(config: SystemConfig, antenna_pos, user_pos):
    """Line-of-sight spherical-wave gain between 3-D points (broadcasts)."""
    diff = np.asarray(user_pos, dtype=float) - np.asarray(antenna_pos, dtype=float)
    r = np.sqrt(np.sum(diff * diff, axis=-1))
    lam = config.wavelength
    return lam * np.exp(-2j * np.pi * r / lam) / (4.0 * np.pi * r)


def distances(config: SystemConfig, scenario: Scenario, assignment: Assignment,
              x: np.ndarray) -> np.ndarray:
    """``r[a, k]``: distance from antenna ``a`` to user ``k``."""
    ya = config.waveguide_ys[assignment.serving]
    dx = scenario.x[None, :] - np.asarray(x, dtype=float)[:, None]
    dy = scenario.y[None, :] - ya[:, None]
    return np.sqrt(dx * dx + dy * dy + config.height ** 2)


def link_gains(config: SystemConfig, scenario: Scenario, assignment: Assignment,
               x: np.ndarray, r: Optional[np.ndarray] = None) -> np.ndarray:
    """``G[a, k] = h_{a,k} * g_a`` for every antenna ``a`` and user ``k``."""
    if r is None:
        r = distances(config, scenario, assignment, x)
    lam = config.wavelength
    phase = 2.0 * np.pi * (r + config.n_eff * np.asarray(x, dtype=float)[:, None]) / lam
    return lam / (4.0 * np.pi * r) * np.exp(-1j * phase)


def waveguide_sums(assignment: Assignment, gains: np.ndarray, num_waveguides: int) -> np.ndarray:
    """Coherent sum of ``gains`` rows over each waveguide's antennas, shape ``(N, K)``."""
    out = np.zeros((num_waveguides, gains.shape[1]), dtype=gains.dtype)
    np.add.at(out, assignment.serving, gains)
    return out


@dataclass(frozen=True)
class ChannelMatrix:
    """Effective channels and the signal / interference-plus-noise powers.

    ``effective[i, k]`` is the channel from the antennas of user ``i``'s
    serving waveguide to user ``k``.
    """

    effective: np.ndarray
    signal: np.ndarray
    interference: np.ndarray

    @property
    def A(self) -> np.ndarray:
        return self.signal

    @property
    def B(self) -> np.ndarray:
        return self.interference


def effective_channels(config: SystemConfig, scenario: Scenario, assignment: Assignment,
                       x: np.ndarray) -> ChannelMatrix:
    x = np.asarray(x, dtype=float)
    k = scenario.num_users
    if x.shape != (k,) or assignment.num_users != k:
        raise ValueError(f"placement of shape {x.shape} does not match {k} users")
    gains = link_gains(config, scenario, assignment, x)
    per_wg = waveguide_sums(assignment, gains, config.num_waveguides)
    eff = per_wg[assignment.serving]
    power = np.abs(eff) ** 2
    p = config.tx_power_per_user
    signal = p * np.diag(power).copy()
    interference = p * (power.sum(axis=0) - np.diag(power)) + config.noise_power
    return ChannelMatrix(effective=eff, signal=signal, interference=interference)


def sinr_and_rates(channels: ChannelMatrix):
    """Return ``(sinr, rates, mean_rate)`` with rates in bits/s/Hz."""
    sinr = channels.signal / channels.interference
    rates = np.log2(1.0 + sinr)
    return sinr, rates, float(np.mean(rates))


def mean_rate(config: SystemConfig, scenario: Scenario, assignment: Assignment,
              x: np.ndarray) -> float:
    return sinr_and_rates(effective_channels(config, scenario, assignment, x))[2]
