"""Time-varying advection-diffusion channel.

The medium moves with a spatially uniform, per-tick random flow velocity
shared by every receiver. Each emission tick releases a point impulse whose
concentration field is the free-space Gaussian kernel rigidly translated by
the flow displacement accumulated since release (exact for spatially
uniform advection):

    c(tau) = Q * (4*pi*D*tau)^(-3/2) * exp(-|delta_r - s(tau)|^2 / (4*D*tau))

Contributions are truncated to the channel memory window (0, t_mem].
Observation noise is additive white Gaussian, calibrated from the noiseless
main-receiver power over the pilot span.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import BoundsError, ConfigError, DegenerateDataError
from .modem import EmissionSchedule

Vec3 = tuple[float, float, float]


def _as_vec3(value, name: str) -> Vec3:
    vec = tuple(float(v) for v in value)
    if len(vec) != 3:
        raise ConfigError(f"{name} must have exactly 3 components, got {len(vec)}")
    if not all(math.isfinite(v) for v in vec):
        raise ConfigError(f"{name} must be finite, got {vec}")
    return vec


@dataclass(frozen=True)
class ChannelParams:
    """Physical channel constants.

    diffusion_coeff in m^2/s; mean_vel/std_vel are per-axis statistics of the
    per-tick Gaussian flow velocity (z components must be zero: the flow is
    horizontal). f_sim is the channel tick rate, f_rx the receiver processing
    rate (f_sim must be an integer multiple), t_mem the memory window, and
    emission_scale converts amplitude levels to molecules per second.
    """

    diffusion_coeff: float
    mean_vel: Vec3
    std_vel: Vec3
    f_sim: float
    f_rx: float
    t_mem: float
    emission_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mean_vel", _as_vec3(self.mean_vel, "mean_vel"))
        object.__setattr__(self, "std_vel", _as_vec3(self.std_vel, "std_vel"))
        if not (math.isfinite(self.diffusion_coeff) and self.diffusion_coeff > 0):
            raise ConfigError(f"diffusion_coeff must be positive, got {self.diffusion_coeff}")
        for name in ("f_sim", "f_rx", "t_mem", "emission_scale"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be positive and finite, got {v}")
        ratio = self.f_sim / self.f_rx
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ConfigError(f"f_sim={self.f_sim} must be an integer multiple of f_rx={self.f_rx}")
        if any(s < 0 for s in self.std_vel):
            raise ConfigError(f"std_vel components must be >= 0, got {self.std_vel}")
        if self.mean_vel[2] != 0.0 or self.std_vel[2] != 0.0:
            raise ConfigError("vertical (z) flow must be zero")

    @property
    def dt(self) -> float:
        return 1.0 / self.f_sim

    @property
    def decimation(self) -> int:
        return int(round(self.f_sim / self.f_rx))

    @property
    def mem_ticks(self) -> int:
        return int(math.floor(self.t_mem * self.f_sim + 1e-9))


@dataclass(frozen=True)
class Geometry:
    """Transmitter plus receiver positions; rx_pos[0] is the main receiver."""

    tx_pos: Vec3
    rx_pos: tuple[Vec3, ...]

    def __post_init__(self):
        object.__setattr__(self, "tx_pos", _as_vec3(self.tx_pos, "tx_pos"))
        if len(self.rx_pos) == 0:
            raise ConfigError("geometry needs at least one receiver")
        object.__setattr__(
            self, "rx_pos", tuple(_as_vec3(p, f"rx_pos[{i}]") for i, p in enumerate(self.rx_pos))
        )

    @property
    def n_rx(self) -> int:
        return len(self.rx_pos)


@dataclass(frozen=True)
class VelocityTrace:
    """Per-tick flow velocities and their running displacement.

    cum_displacement[k] = dt * sum(samples[0..k]), i.e. the displacement at
    time (k+1)*dt; the displacement at time 0 is implicitly zero.
    """

    dt: float
    samples: np.ndarray = field(repr=False)  # (n, 3)
    cum_displacement: np.ndarray = field(repr=False)  # (n, 3)

    @property
    def n_ticks(self) -> int:
        return int(self.samples.shape[0])

    @property
    def duration(self) -> float:
        return self.n_ticks * self.dt

    def displacement_knots(self):
        """Displacement at tick boundaries: times (n+1,), per-axis values with leading zeros."""
        n = self.n_ticks
        times = np.arange(n + 1) * self.dt
        disp = np.zeros((n + 1, 3))
        disp[1:] = self.cum_displacement
        return times, disp


@dataclass(frozen=True)
class ConcentrationTrace:
    """Concentration samples for one receiver on the channel tick grid."""

    f_sim: float
    values: np.ndarray = field(repr=False)

    @property
    def n_ticks(self) -> int:
        return int(self.values.size)


def sample_velocity_trace(
    params: ChannelParams, duration: float, rng: np.random.Generator
) -> VelocityTrace:
    """Draw one shared flow realization: i.i.d. Gaussian (vx, vy) per tick, vz = 0."""
    if not (duration > 0 and math.isfinite(duration)):
        raise ConfigError(f"duration must be positive and finite, got {duration}")
    n = int(round(duration * params.f_sim))
    if n < 1:
        raise ConfigError(f"duration {duration} s is below one channel tick")
    v = np.zeros((n, 3))
    v[:, 0] = rng.normal(params.mean_vel[0], params.std_vel[0], size=n)
    v[:, 1] = rng.normal(params.mean_vel[1], params.std_vel[1], size=n)
    cum = params.dt * np.cumsum(v, axis=0)
    return VelocityTrace(dt=params.dt, samples=v, cum_displacement=cum)


def impulse_concentration(
    params: ChannelParams,
    tx_pos,
    rx_pos,
    release_time: float,
    trace: VelocityTrace,
    eval_times,
    quantity: float = 1.0,
):
    """Concentration at rx_pos from one impulse released at tx_pos at release_time.

    Zero outside the memory window (tau <= 0 or tau > t_mem). Displacements
    at off-grid times are linearly interpolated within the tick.
    """
    tx = _as_vec3(tx_pos, "tx_pos")
    rx = _as_vec3(rx_pos, "rx_pos")
    scalar = np.isscalar(eval_times)
    t = np.atleast_1d(np.asarray(eval_times, dtype=np.float64))
    if release_time < 0:
        raise BoundsError(f"release_time {release_time} precedes the trace start")
    span = trace.duration
    limit = max(release_time, float(t.max(initial=0.0)))
    if limit > span * (1 + 1e-12) + 1e-12:
        raise BoundsError(f"velocity trace covers {span} s but {limit} s was requested")

    times, disp = trace.displacement_knots()
    s_rel = np.array([np.interp(release_time, times, disp[:, ax]) for ax in range(2)])
    tau = t - release_time
    active = (tau > 0) & (tau <= params.t_mem)
    out = np.zeros_like(t)
    if np.any(active):
        ta = tau[active]
        te = t[active]
        mis_x = (rx[0] - tx[0]) - (np.interp(te, times, disp[:, 0]) - s_rel[0])
        mis_y = (rx[1] - tx[1]) - (np.interp(te, times, disp[:, 1]) - s_rel[1])
        mis_z = rx[2] - tx[2]
        four_d_tau = 4.0 * params.diffusion_coeff * ta
        sq = mis_x * mis_x + mis_y * mis_y + mis_z * mis_z
        out[active] = quantity * (np.pi * four_d_tau) ** -1.5 * np.exp(-sq / four_d_tau)
    return float(out[0]) if scalar else out


def trace_seconds(schedule: EmissionSchedule, params: ChannelParams) -> int:
    """Whole seconds covered by the frame's concentration traces."""
    return int(math.ceil(schedule.frame_duration + params.t_mem))


def propagate_frame(
    schedule: EmissionSchedule,
    geometry: Geometry,
    params: ChannelParams,
    rng: np.random.Generator,
) -> list[ConcentrationTrace]:
    """Noiseless concentration traces at every receiver for one frame.

    A single velocity realization is drawn for the whole frame and shared by
    all receivers (the flow is spatially uniform); emission impulses
    superpose additively with memory truncation at t_mem.
    """
    if schedule.n_ticks == 0:
        raise ConfigError("emission schedule is empty")
    if abs(schedule.f_sim - params.f_sim) > 1e-9:
        raise ConfigError(
            f"schedule tick rate {schedule.f_sim} differs from channel f_sim {params.f_sim}"
        )
    seconds = trace_seconds(schedule, params)
    n_ticks = int(round(seconds * params.f_sim))
    vel = sample_velocity_trace(params, float(seconds), rng)

    disp_x = np.concatenate(([0.0], vel.cum_displacement[:, 0]))
    disp_y = np.concatenate(([0.0], vel.cum_displacement[:, 1]))
    monotone = bool(np.all(vel.samples[:, 0] > 0.0))
    amps = schedule.amplitudes * params.dt  # molecules carried by each tick impulse
    mem_ticks = min(params.mem_ticks, n_ticks)
    tx = geometry.tx_pos

    out = np.zeros((geometry.n_rx, n_ticks))
    groups: dict[float, list[int]] = {}
    for j, pos in enumerate(geometry.rx_pos):
        groups.setdefault(pos[0] - tx[0], []).append(j)
    for dx, idxs in groups.items():
        dy = np.array([geometry.rx_pos[j][1] - tx[1] for j in idxs])
        dz = np.array([geometry.rx_pos[j][2] - tx[2] for j in idxs])
        res = _kernels.superpose_emissions(
            amps,
            disp_x,
            disp_y,
            params.dt,
            params.diffusion_coeff,
            params.t_mem,
            mem_ticks,
            dx,
            dy,
            dz,
            n_ticks,
            monotone,
            _kernels.EXPONENT_CUTOFF,
        )
        for row, j in enumerate(idxs):
            out[j] = res[row]
    return [ConcentrationTrace(f_sim=params.f_sim, values=out[j]) for j in range(geometry.n_rx)]


def calibrate_noise_std(
    trace: ConcentrationTrace, snr_db: float, pilot_span: tuple[float, float] | None = None
) -> float:
    """Noise std achieving snr_db against the trace's mean squared value.

    pilot_span (start, stop) in seconds restricts the power estimate to the
    samples feeding the pilot matched filters; None uses the whole trace.
    snr_db = +inf disables noise.
    """
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    values = trace.values
    if pilot_span is not None:
        i0 = max(0, int(round(pilot_span[0] * trace.f_sim)))
        i1 = min(trace.n_ticks, int(round(pilot_span[1] * trace.f_sim)))
        if i1 <= i0:
            raise ConfigError(f"pilot span {pilot_span} selects no samples")
        values = values[i0:i1]
    p_sig = float(np.mean(np.square(values)))
    if p_sig == 0.0:
        raise DegenerateDataError("trace is all-zero over the pilot span; SNR is undefined")
    return math.sqrt(p_sig / 10.0 ** (snr_db / 10.0))


def add_noise(
    trace: ConcentrationTrace, noise_std: float, rng: np.random.Generator
) -> ConcentrationTrace:
    """Add i.i.d. zero-mean Gaussian noise per sample (no clipping of negatives)."""
    if noise_std < 0:
        raise ConfigError(f"noise_std must be >= 0, got {noise_std}")
    if noise_std == 0.0:
        return ConcentrationTrace(f_sim=trace.f_sim, values=trace.values.copy())
    noisy = trace.values + noise_std * rng.standard_normal(trace.n_ticks)
    return ConcentrationTrace(f_sim=trace.f_sim, values=noisy)


def nominal_flight_time(params: ChannelParams, geometry: Geometry) -> float:
    """Downstream distance to the main receiver divided by the mean x-velocity."""
    dx = geometry.rx_pos[0][0] - geometry.tx_pos[0]
    mu = params.mean_vel[0]
    if mu <= 0 or dx <= 0:
        raise ConfigError(
            f"nominal flight time needs positive mean x-velocity and downstream main receiver (dx={dx}, mu_vx={mu})"
        )
    return dx / mu
