"""Orthogonal-pulse modulation: constellation, frames, emission schedules.

A symbol duration is split into ``n_dim`` non-overlapping rectangular
subintervals (one pulse per dimension); each dimension independently
carries one of ``m_levels`` nonnegative amplitude levels, so a symbol is a
point on the integer grid {0..M-1}^N and the constellation has M^N points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BoundsError, ConfigError

# Hard cap on constellation cardinality; anything larger is almost
# certainly a configuration mistake and would make detection tables huge.
CONSTELLATION_CAP = 4096

# Entropy tag separating the pilot stream from every other seeded stream.
PILOT_STREAM_TAG = 0x70696C6F  # "pilo"


@dataclass(frozen=True)
class ModScheme:
    """Pulse-amplitude scheme: ``n_dim`` pulses per symbol, ``m_levels`` levels each."""

    n_dim: int
    m_levels: int
    t_sym: float

    def __post_init__(self):
        if self.n_dim < 1:
            raise ConfigError(f"n_dim must be >= 1, got {self.n_dim}")
        if self.m_levels < 1:
            raise ConfigError(f"m_levels must be >= 1, got {self.m_levels}")
        if not (self.t_sym > 0 and np.isfinite(self.t_sym)):
            raise ConfigError(f"t_sym must be positive and finite, got {self.t_sym}")

    @property
    def n_points(self) -> int:
        return self.m_levels**self.n_dim

    @property
    def t_sub(self) -> float:
        """Duration of one pulse subinterval."""
        return self.t_sym / self.n_dim

    @property
    def bits_per_symbol(self) -> int | None:
        """Bits per symbol under the per-dimension Gray map; None unless M is a power of two."""
        m = self.m_levels
        if m >= 2 and (m & (m - 1)) == 0:
            return self.n_dim * (m.bit_length() - 1)
        return None


@dataclass(frozen=True)
class Constellation:
    """Full integer amplitude grid {0..M-1}^N in lexicographic order, dimension 0 fastest."""

    n_dim: int
    m_levels: int
    points: np.ndarray = field(repr=False)  # (M^N, N) int array

    def amplitudes(self, indices) -> np.ndarray:
        """Amplitude vectors (float) for a sequence of constellation indices."""
        return self.points[np.asarray(indices, dtype=np.intp)].astype(np.float64)

    def index_of(self, levels: np.ndarray) -> np.ndarray:
        """Inverse map: per-dimension levels -> lexicographic index (dimension 0 fastest)."""
        levels = np.asarray(levels, dtype=np.int64)
        weights = self.m_levels ** np.arange(self.n_dim, dtype=np.int64)
        return levels @ weights


def build_constellation(n_dim: int, m_levels: int, cap: int = CONSTELLATION_CAP) -> Constellation:
    """Enumerate the M^N grid. Raises ConfigError when the cardinality exceeds ``cap``."""
    if n_dim < 1 or m_levels < 1:
        raise ConfigError("constellation needs n_dim >= 1 and m_levels >= 1")
    n_points = m_levels**n_dim
    if n_points > cap:
        raise ConfigError(f"constellation size {n_points} exceeds cap {cap}")
    idx = np.arange(n_points, dtype=np.int64)
    points = np.empty((n_points, n_dim), dtype=np.int64)
    for i in range(n_dim):
        points[:, i] = (idx // m_levels**i) % m_levels
    return Constellation(n_dim=n_dim, m_levels=m_levels, points=points)


def pulse_value(i: int, t: float, scheme: ModScheme) -> float:
    """Rectangular pulse ``i`` evaluated at time ``t`` within the symbol: 1 on its subinterval."""
    if not 0 <= i < scheme.n_dim:
        raise BoundsError(f"pulse index {i} out of range for n_dim={scheme.n_dim}")
    t_sub = scheme.t_sub
    return 1.0 if i * t_sub <= t < (i + 1) * t_sub else 0.0


@dataclass(frozen=True)
class Frame:
    """Pilot + data symbol sequence; pilots reproduce deterministically from ``pilot_seed``."""

    scheme: ModScheme
    pilot_symbols: np.ndarray = field(repr=False)  # constellation indices
    data_symbols: np.ndarray = field(repr=False)
    pilot_seed: int

    @property
    def n_pilot(self) -> int:
        return int(self.pilot_symbols.size)

    @property
    def n_data(self) -> int:
        return int(self.data_symbols.size)

    @property
    def symbols(self) -> np.ndarray:
        return np.concatenate([self.pilot_symbols, self.data_symbols])

    @property
    def duration(self) -> float:
        return (self.n_pilot + self.n_data) * self.scheme.t_sym


def generate_frame(
    scheme: ModScheme,
    n_pilot: int,
    n_data: int,
    pilot_seed: int,
    data_rng: np.random.Generator,
) -> Frame:
    """Draw a frame: pilots from a stream fixed by ``pilot_seed``, data from ``data_rng``.

    Both streams are uniform over the constellation. Data-bearing frames
    need m_levels >= 2, otherwise every symbol would be the all-zero point.
    """
    if n_pilot < 0 or n_data < 0:
        raise ConfigError("symbol counts must be nonnegative")
    if n_data > 0 and scheme.m_levels < 2:
        raise ConfigError("data-bearing frames need m_levels >= 2")
    n_points = scheme.n_points
    pilot_rng = np.random.default_rng(np.random.SeedSequence([int(pilot_seed), PILOT_STREAM_TAG]))
    pilots = pilot_rng.integers(0, n_points, size=n_pilot, dtype=np.int64)
    data = data_rng.integers(0, n_points, size=n_data, dtype=np.int64)
    return Frame(scheme=scheme, pilot_symbols=pilots, data_symbols=data, pilot_seed=int(pilot_seed))


@dataclass(frozen=True)
class EmissionSchedule:
    """Per-tick emission amplitudes on the channel tick grid (all nonnegative)."""

    amplitudes: np.ndarray = field(repr=False)
    frame_duration: float
    f_sim: float

    @property
    def n_ticks(self) -> int:
        return int(self.amplitudes.size)


def ticks_per_subinterval(scheme: ModScheme, f_sim: float) -> int:
    """Channel ticks per pulse subinterval; must divide exactly."""
    exact = scheme.t_sub * f_sim
    ticks = int(round(exact))
    if ticks < 1 or abs(exact - ticks) > 1e-9 * max(1.0, exact):
        raise ConfigError(
            f"t_sym/n_dim = {scheme.t_sub} s is not an integer number of channel ticks at f_sim={f_sim} Hz"
        )
    return ticks


def frame_to_emission(frame: Frame, f_sim: float, emission_scale: float = 1.0) -> EmissionSchedule:
    """Expand a frame into one emission amplitude per channel tick.

    Symbol k occupies [k*t_sym, (k+1)*t_sym); within it, subinterval i carries
    the constant rate level_i(k) * emission_scale.
    """
    scheme = frame.scheme
    ticks = ticks_per_subinterval(scheme, f_sim)
    constellation = build_constellation(scheme.n_dim, scheme.m_levels)
    symbols = frame.symbols
    if symbols.size == 0:
        amps = np.zeros(0, dtype=np.float64)
    else:
        levels = constellation.points[symbols]  # (n_sym, N)
        amps = np.repeat(levels.reshape(-1).astype(np.float64) * emission_scale, ticks)
    return EmissionSchedule(amplitudes=amps, frame_duration=frame.duration, f_sim=f_sim)
