"""Diversity combining of receiver branches.

Four strategies over the per-receiver symbol-vector streams:

* SC  - selection: the main receiver alone (single-branch baseline).
* EGC - equal gain: uniform weights.
* DGC - distribution gain: weights follow the Gaussian density of the
  transverse scatter evaluated at each receiver's y offset.
* PGC - pilot energy gain: weights proportional to measured pilot energies.

All weights are normalized to sum to one and are nonnegative, so the
combined stream is a convex combination of the branches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .channel import ChannelParams, Geometry, nominal_flight_time
from .errors import ConfigError, DegenerateDataError


class CombinerKind(Enum):
    SC = "sc"
    EGC = "egc"
    DGC = "dgc"
    PGC = "pgc"

    @classmethod
    def parse(cls, text: str) -> "CombinerKind":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ConfigError(f"unknown combiner {text!r}; expected one of sc, egc, dgc, pgc") from None


@dataclass(frozen=True)
class Weights:
    """Normalized nonnegative branch weights."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if v.ndim != 1 or v.size == 0:
            raise ConfigError("weights must be a nonempty 1-D array")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ConfigError("weights must be finite and nonnegative")
        if abs(float(v.sum()) - 1.0) > 1e-12:
            raise ConfigError(f"weights must sum to 1, got {float(v.sum())!r}")


def transverse_scatter_std(params: ChannelParams, geometry: Geometry) -> float:
    """Std of the transverse displacement accumulated over the nominal flight.

    Per-tick i.i.d. velocity draws integrate to a displacement with std
    sigma_vy * sqrt(t_flight * dt); this is the width of the particle cloud
    arriving at the main receiver's x position and the natural scale for DGC.
    """
    t_flight = nominal_flight_time(params, geometry)
    return params.std_vel[1] * math.sqrt(t_flight * params.dt)


def compute_weights(
    kind: CombinerKind,
    geometry: Geometry,
    pilot_energies: np.ndarray | None = None,
    transverse_std: float | None = None,
) -> Weights:
    """Branch weights for one combining strategy.

    PGC needs measured pilot energies (not all zero); DGC needs a positive
    transverse scatter std.
    """
    n_rx = geometry.n_rx
    if kind is CombinerKind.SC:
        v = np.zeros(n_rx)
        v[0] = 1.0
    elif kind is CombinerKind.EGC:
        v = np.full(n_rx, 1.0 / n_rx)
    elif kind is CombinerKind.DGC:
        if transverse_std is None or not (transverse_std > 0):
            raise ConfigError(f"DGC needs a positive transverse_std, got {transverse_std}")
        y = np.array([p[1] for p in geometry.rx_pos]) - geometry.tx_pos[1]
        v = np.exp(-(y * y) / (2.0 * transverse_std * transverse_std))
        v /= v.sum()
    elif kind is CombinerKind.PGC:
        if pilot_energies is None:
            raise ConfigError("PGC needs pilot energies")
        e = np.asarray(pilot_energies, dtype=np.float64)
        if e.size != n_rx:
            raise ConfigError(f"got {e.size} pilot energies for {n_rx} receivers")
        if np.any(e < 0):
            raise DegenerateDataError("pilot energies must be nonnegative")
        total = float(e.sum())
        if total == 0.0:
            raise DegenerateDataError("all pilot energies are zero; PGC weights degenerate")
        v = e / total
    else:  # pragma: no cover - exhaustive enum
        raise ConfigError(f"unhandled combiner {kind}")
    return Weights(values=v)


def combine(per_receiver_vectors: np.ndarray, weights: Weights) -> np.ndarray:
    """Weighted sum of branch symbol vectors: (n_rx, n_sym, N) -> (n_sym, N)."""
    stack = np.asarray(per_receiver_vectors, dtype=np.float64)
    if stack.ndim != 3:
        raise ConfigError(f"expected (n_rx, n_symbols, n_dim) stack, got shape {stack.shape}")
    if stack.shape[0] != weights.values.size:
        raise ConfigError(f"{stack.shape[0]} branches vs {weights.values.size} weights")
    return np.tensordot(weights.values, stack, axes=(0, 0))
