"""Per-receiver signal path: decimation, matched filtering, pilot energy.

All receivers run symbol-synchronously off the main receiver's clock; the
matched filter averages the receiver-rate samples inside each pulse
subinterval, producing one N-vector per transmitted symbol.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelParams, ConcentrationTrace, Geometry, nominal_flight_time
from .errors import BoundsError, ConfigError, DegenerateDataError
from .modem import ModScheme


@dataclass(frozen=True)
class ReceiverObservation:
    """Matched-filter symbol vectors and pilot-span statistics for one receiver."""

    rx_index: int
    symbol_vectors: np.ndarray = field(repr=False)  # (n_symbols, n_dim)
    pilot_energy: float
    sync_offset: float


def downsample(trace: ConcentrationTrace, f_rx: float) -> np.ndarray:
    """Decimate to the receiver rate: keep every (f_sim/f_rx)-th sample from index 0."""
    step = trace.f_sim / f_rx
    if abs(step - round(step)) > 1e-9 or round(step) < 1:
        raise ConfigError(f"f_sim={trace.f_sim} is not an integer multiple of f_rx={f_rx}")
    return trace.values[:: int(round(step))]


def samples_per_subinterval(scheme: ModScheme, f_rx: float) -> int:
    """Receiver samples per pulse subinterval; must divide exactly."""
    exact = scheme.t_sub * f_rx
    n = int(round(exact))
    if n < 1 or abs(exact - n) > 1e-9 * max(1.0, exact):
        raise ConfigError(
            f"t_sym/n_dim = {scheme.t_sub} s is not an integer number of receiver samples at f_rx={f_rx} Hz"
        )
    return n


def matched_filter(
    rx_values: np.ndarray,
    scheme: ModScheme,
    f_rx: float,
    sync_offset: float,
    n_symbols: int,
) -> np.ndarray:
    """Windowed means over each pulse subinterval, one N-vector per symbol.

    Component i of symbol k averages the samples in
    [sync_offset + k*t_sym + i*t_sub, sync_offset + k*t_sym + (i+1)*t_sub).
    """
    spd = samples_per_subinterval(scheme, f_rx)
    off_exact = sync_offset * f_rx
    off = int(round(off_exact))
    if off < 0 or abs(off_exact - off) > 1e-6:
        raise ConfigError(f"sync_offset {sync_offset} s is not aligned to the receiver tick grid")
    need = off + n_symbols * scheme.n_dim * spd
    if need > rx_values.size:
        raise BoundsError(
            f"trace has {rx_values.size} receiver samples, {need} needed for {n_symbols} symbols"
        )
    windows = rx_values[off:need].reshape(n_symbols, scheme.n_dim, spd)
    return windows.mean(axis=2)


def pilot_energy(symbol_vectors: np.ndarray, n_pilot: int) -> float:
    """Total pilot energy: sum of squared norms of the first n_pilot symbol vectors."""
    if n_pilot > symbol_vectors.shape[0]:
        raise BoundsError(f"n_pilot={n_pilot} exceeds {symbol_vectors.shape[0]} symbols")
    return float(np.sum(np.square(symbol_vectors[:n_pilot])))


def pilot_energy_ratio(e_j: float, e_main: float) -> float:
    """Pilot energy of a receiver relative to the main receiver."""
    if e_main <= 0:
        raise DegenerateDataError(f"main pilot energy must be positive, got {e_main}")
    return e_j / e_main


def default_sync_offset(params: ChannelParams, geometry: Geometry) -> float:
    """Nominal propagation delay to the main receiver, rounded to the receiver tick."""
    return round(nominal_flight_time(params, geometry) * params.f_rx) / params.f_rx


def observe(
    trace: ConcentrationTrace,
    scheme: ModScheme,
    params: ChannelParams,
    sync_offset: float,
    n_symbols: int,
    n_pilot: int,
    rx_index: int,
) -> ReceiverObservation:
    """Full per-receiver path: decimate, matched-filter, pilot energy."""
    rx_values = downsample(trace, params.f_rx)
    vectors = matched_filter(rx_values, scheme, params.f_rx, sync_offset, n_symbols)
    return ReceiverObservation(
        rx_index=rx_index,
        symbol_vectors=vectors,
        pilot_energy=pilot_energy(vectors, n_pilot),
        sync_offset=sync_offset,
    )
