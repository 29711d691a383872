"""Symbol detection, error rates, and structured-signal statistics.

Detection slices each equalized vector per dimension to the nearest
amplitude level (equivalent to minimum-distance detection on the
rectangular grid). Bit errors use a per-dimension Gray map and are only
defined when the level count is a power of two.

A side receiver's observation is "structured" when its pilot energy ratio
against the main receiver reaches the threshold eta; the critical
transverse distance is the largest offset at which that happens with
probability at least 1 - delta, estimated by Monte Carlo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import seeds
from .channel import Geometry, add_noise, calibrate_noise_std, propagate_frame
from .config import SimConfig
from .errors import ConfigError, DegenerateDataError, McLinkError
from .frontend import default_sync_offset, observe, pilot_energy_ratio
from .modem import ModScheme, frame_to_emission, generate_frame


@dataclass(frozen=True)
class DetectionResult:
    """Decisions and error rates over the data portion of a frame.

    ber is None when m_levels is not a power of two (no bit map defined);
    the raw error counts are kept so multi-trial results pool exactly.
    """

    decided_indices: np.ndarray = field(repr=False)
    ser: float
    ber: float | None
    n_symbols: int
    symbol_errors: int
    bit_errors: int | None
    bits_per_symbol: int | None


def slice_symbols(vectors: np.ndarray, scheme: ModScheme) -> np.ndarray:
    """Nearest-level decision per dimension, ties rounding up, ends clamped.

    Returns lexicographic constellation indices (dimension 0 fastest).
    """
    v = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    if v.shape[1] != scheme.n_dim:
        raise ConfigError(f"vectors have dimension {v.shape[1]}, scheme has {scheme.n_dim}")
    if not np.all(np.isfinite(v)):
        raise DegenerateDataError("non-finite value in detector input")
    levels = np.clip(np.floor(v + 0.5).astype(np.int64), 0, scheme.m_levels - 1)
    weights = scheme.m_levels ** np.arange(scheme.n_dim, dtype=np.int64)
    return levels @ weights


def slice_vector(vector, scheme: ModScheme) -> int:
    return int(slice_symbols(np.asarray(vector)[None, :], scheme)[0])


def _gray(levels: np.ndarray) -> np.ndarray:
    return levels ^ (levels >> 1)


def error_rates(decided: np.ndarray, truth: np.ndarray, scheme: ModScheme) -> DetectionResult:
    """Symbol and (when defined) Gray-mapped bit error rates."""
    decided = np.asarray(decided, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if decided.shape != truth.shape:
        raise ConfigError(f"decided/truth length mismatch: {decided.shape} vs {truth.shape}")
    n = decided.size
    symbol_errors = int(np.count_nonzero(decided != truth))
    ser = symbol_errors / n if n else 0.0

    bits = scheme.bits_per_symbol
    if bits is None or n == 0:
        ber = None if bits is None else 0.0
        bit_errors = None if bits is None else 0
    else:
        m = scheme.m_levels
        weights = m ** np.arange(scheme.n_dim, dtype=np.int64)
        lev_d = (decided[:, None] // weights) % m
        lev_t = (truth[:, None] // weights) % m
        xor = _gray(lev_d) ^ _gray(lev_t)
        popcount = np.array([bin(i).count("1") for i in range(m)], dtype=np.int64)
        bit_errors = int(popcount[xor].sum())
        ber = bit_errors / (n * bits)
    return DetectionResult(
        decided_indices=decided,
        ser=ser,
        ber=ber,
        n_symbols=n,
        symbol_errors=symbol_errors,
        bit_errors=bit_errors,
        bits_per_symbol=bits,
    )


def wilson_interval(successes: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson 95% (by default) confidence interval for a binomial proportion."""
    if n <= 0:
        return 0.0, 1.0
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == n else min(1.0, center + half)
    return lo, hi


# ---------------------------------------------------------------------------
# Structured-signal probability and critical transverse distance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StructuredScan:
    """Monte Carlo estimates of P(pilot energy ratio >= eta) over probe offsets."""

    y_positions: tuple[float, ...]
    prob_estimates: tuple[float, ...]
    ci_lo: tuple[float, ...]
    ci_hi: tuple[float, ...]
    eta: float
    delta: float
    n_mc: int


def pilot_ratio_trial(config: SimConfig, probe_y: float, trial_index: int, master_seed: int) -> float:
    """One Monte Carlo draw of the probe receiver's pilot energy ratio.

    Transmits the pilot span only (emissions after it cannot reach back into
    the pilot observation window, and the ratio depends on nothing else),
    with a probe receiver at the main receiver's (x, z) and transverse
    offset probe_y. A probe exactly on the main receiver sees the identical
    observation, so its ratio is 1 by construction.
    """
    main = config.geometry.rx_pos[0]
    probe = (main[0], float(probe_y), main[2])
    if probe == main:
        return 1.0
    params = config.channel
    geometry = Geometry(tx_pos=config.geometry.tx_pos, rx_pos=(main, probe))
    pilot_cfg = replace(config, geometry=geometry, n_data=0)

    data_rng = seeds.stream(master_seed, trial_index, seeds.TAG_DATA)
    frame = generate_frame(pilot_cfg.scheme, pilot_cfg.n_pilot, 0, pilot_cfg.pilot_seed, data_rng)
    schedule = frame_to_emission(frame, params.f_sim, params.emission_scale)
    vel_rng = seeds.stream(master_seed, trial_index, seeds.TAG_VELOCITY)
    traces = propagate_frame(schedule, geometry, params, vel_rng)

    sync = default_sync_offset(params, geometry)
    span = (sync, sync + pilot_cfg.n_pilot * pilot_cfg.scheme.t_sym)
    noise_std = calibrate_noise_std(traces[0], pilot_cfg.snr_db, pilot_span=span)
    energies = []
    for j, trace in enumerate(traces):
        noisy = add_noise(trace, noise_std, seeds.noise_stream(master_seed, trial_index, geometry.rx_pos[j]))
        obs = observe(noisy, pilot_cfg.scheme, params, sync, pilot_cfg.n_pilot, pilot_cfg.n_pilot, j)
        energies.append(obs.pilot_energy)
    return pilot_energy_ratio(energies[1], energies[0])


def _ratio_task(args) -> float:
    config, probe_y, trial_index, master_seed = args
    try:
        return pilot_ratio_trial(config, probe_y, trial_index, master_seed)
    except McLinkError as exc:
        raise type(exc)(f"trial {trial_index}: {exc}") from exc


def structured_probability(
    y: float,
    config: SimConfig,
    eta: float,
    n_mc: int,
    master_seed: int,
    map_fn=map,
) -> float:
    """Fraction of n_mc independent transmissions with pilot energy ratio >= eta."""
    if n_mc < 1:
        raise ConfigError(f"n_mc must be >= 1, got {n_mc}")
    if not 0 <= eta <= 1:
        raise ConfigError(f"eta must lie in [0, 1], got {eta}")
    tasks = [(config, float(y), t, int(master_seed)) for t in range(n_mc)]
    ratios = list(map_fn(_ratio_task, tasks))
    return sum(1 for r in ratios if r >= eta) / n_mc


def critical_distance(
    config: SimConfig,
    eta: float,
    delta: float,
    y_grid,
    n_mc: int,
    master_seed: int,
    map_fn=map,
) -> float:
    """Largest grid offset still structured with probability >= 1 - delta.

    Scans outward from y = 0 and stops at the first failing position (the
    probability is treated as monotone in |y|); the grid must be sorted
    ascending and start at 0.
    """
    grid = [float(y) for y in y_grid]
    if not grid:
        raise ConfigError("y_grid must be nonempty")
    if grid[0] != 0.0 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("y_grid must start at 0 and increase strictly")
    if not 0 < delta <= 1:
        raise ConfigError(f"delta must lie in (0, 1], got {delta}")
    y_c = 0.0
    for y in grid:
        p_hat = structured_probability(y, config, eta, n_mc, master_seed, map_fn=map_fn)
        if p_hat >= 1.0 - delta:
            y_c = y
        else:
            break
    return y_c
