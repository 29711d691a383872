"""Simulation configuration and its flat key-value file format.

Config files are UTF-8 text, one ``section.key = value`` per line, ``#``
comments; vectors are space-separated floats and receiver positions use
numbered keys (geometry.rx0 is the main receiver). parse/serialize round-trip
exactly. See README for the full schema.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

from .channel import ChannelParams, Geometry
from .combining import CombinerKind
from .errors import ConfigError
from .frontend import samples_per_subinterval
from .modem import ModScheme, ticks_per_subinterval

EQUALIZER_CHOICES = ("none", "affine-mmse")

# Default SNR grid for sweeps (dB), overridable from the CLI.
DEFAULT_SNR_GRID = (-20.0, -15.0, -10.0, -8.0, -5.0, -3.0, 0.0, 5.0, 10.0)

# Default transverse grid (m) for structured-signal scans.
DEFAULT_Y_GRID = (0.0, 0.001, 0.002, 0.005, 0.01, 0.02, 0.05)


@dataclass(frozen=True)
class SimConfig:
    """Everything one experiment needs; defaults mirror the reference setup."""

    channel: ChannelParams
    geometry: Geometry
    scheme: ModScheme
    n_pilot: int
    n_data: int
    pilot_seed: int
    snr_db: float
    combiners: tuple[CombinerKind, ...]
    equalizer: str
    master_seed: int
    n_trials: int

    def __post_init__(self):
        if self.n_pilot < 0 or self.n_data < 0:
            raise ConfigError("symbol counts must be nonnegative")
        if self.n_trials < 1:
            raise ConfigError(f"n_trials must be >= 1, got {self.n_trials}")
        if self.equalizer not in EQUALIZER_CHOICES:
            raise ConfigError(f"equalizer must be one of {EQUALIZER_CHOICES}, got {self.equalizer!r}")
        if not self.combiners:
            raise ConfigError("at least one combiner is required")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ConfigError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}")
        if not (math.isfinite(self.snr_db) or self.snr_db == math.inf):
            raise ConfigError(f"snr_db must be finite or +inf, got {self.snr_db}")
        # cross-module tick alignment
        ticks_per_subinterval(self.scheme, self.channel.f_sim)
        samples_per_subinterval(self.scheme, self.channel.f_rx)


def default_config() -> SimConfig:
    """Bundled reference configuration: 5-receiver array, (N,M)=(2,4), -5 dB."""
    channel = ChannelParams(
        diffusion_coeff=6.7698e-6,
        mean_vel=(0.5, 0.0, 0.0),
        std_vel=(1e-3, 0.1, 0.0),
        f_sim=1000.0,
        f_rx=100.0,
        t_mem=30.0,
        emission_scale=1.0,
    )
    geometry = Geometry(
        tx_pos=(0.0, 0.0, 1.0),
        rx_pos=(
            (1.0, 0.0, 1.0),
            (1.0, 0.001, 1.0),
            (1.0, -0.001, 1.0),
            (1.0, 0.002, 1.0),
            (1.0, -0.002, 1.0),
        ),
    )
    return SimConfig(
        channel=channel,
        geometry=geometry,
        scheme=ModScheme(n_dim=2, m_levels=4, t_sym=2.0),
        n_pilot=32,
        n_data=1000,
        pilot_seed=12345,
        snr_db=-5.0,
        combiners=(CombinerKind.SC, CombinerKind.EGC, CombinerKind.DGC, CombinerKind.PGC),
        equalizer="affine-mmse",
        master_seed=1,
        n_trials=20,
    )


def symmetric_receiver_layout(x: float, z: float, n_rx: int, delta_y: float) -> tuple:
    """Receivers at y = 0, +dy, -dy, +2dy, -2dy, ... (main receiver first)."""
    if n_rx < 1 or n_rx % 2 == 0:
        raise ConfigError(f"symmetric layout needs an odd receiver count >= 1, got {n_rx}")
    positions = [(x, 0.0, z)]
    for k in range(1, n_rx // 2 + 1):
        positions.append((x, k * delta_y, z))
        positions.append((x, -k * delta_y, z))
    return tuple(positions)


def _fmt(value: float) -> str:
    return repr(float(value))


def serialize_config(cfg: SimConfig) -> str:
    ch, geo, sch = cfg.channel, cfg.geometry, cfg.scheme
    lines = [
        f"channel.diffusion_coeff = {_fmt(ch.diffusion_coeff)}",
        f"channel.mean_vel_x = {_fmt(ch.mean_vel[0])}",
        f"channel.mean_vel_y = {_fmt(ch.mean_vel[1])}",
        f"channel.std_vel_x = {_fmt(ch.std_vel[0])}",
        f"channel.std_vel_y = {_fmt(ch.std_vel[1])}",
        f"channel.f_sim = {_fmt(ch.f_sim)}",
        f"channel.f_rx = {_fmt(ch.f_rx)}",
        f"channel.t_mem = {_fmt(ch.t_mem)}",
        f"channel.emission_scale = {_fmt(ch.emission_scale)}",
        f"geometry.tx = {_fmt(geo.tx_pos[0])} {_fmt(geo.tx_pos[1])} {_fmt(geo.tx_pos[2])}",
    ]
    for i, p in enumerate(geo.rx_pos):
        lines.append(f"geometry.rx{i} = {_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])}")
    lines += [
        f"modem.n_dim = {sch.n_dim}",
        f"modem.m_levels = {sch.m_levels}",
        f"modem.t_sym = {_fmt(sch.t_sym)}",
        f"frame.n_pilot = {cfg.n_pilot}",
        f"frame.n_data = {cfg.n_data}",
        f"frame.pilot_seed = {cfg.pilot_seed}",
        f"run.snr_db = {_fmt(cfg.snr_db)}",
        "run.combiners = " + ",".join(k.value for k in cfg.combiners),
        f"run.equalizer = {cfg.equalizer}",
        f"run.master_seed = {cfg.master_seed}",
        f"run.n_trials = {cfg.n_trials}",
    ]
    return "\n".join(lines) + "\n"


def _parse_float(raw: str, key: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from None


def _parse_int(raw: str, key: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None


def _parse_vec3(raw: str, key: str) -> tuple[float, float, float]:
    parts = raw.split()
    if len(parts) != 3:
        raise ConfigError(f"{key}: expected 3 space-separated floats, got {raw!r}")
    return tuple(_parse_float(p, key) for p in parts)  # type: ignore[return-value]


def parse_config(text: str) -> SimConfig:
    """Parse the flat key-value format; unknown keys are errors."""
    entries: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = body.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = raw

    def take(key: str) -> str:
        if key not in entries:
            raise ConfigError(f"missing required key {key!r}")
        return entries.pop(key)

    channel = ChannelParams(
        diffusion_coeff=_parse_float(take("channel.diffusion_coeff"), "channel.diffusion_coeff"),
        mean_vel=(
            _parse_float(take("channel.mean_vel_x"), "channel.mean_vel_x"),
            _parse_float(take("channel.mean_vel_y"), "channel.mean_vel_y"),
            0.0,
        ),
        std_vel=(
            _parse_float(take("channel.std_vel_x"), "channel.std_vel_x"),
            _parse_float(take("channel.std_vel_y"), "channel.std_vel_y"),
            0.0,
        ),
        f_sim=_parse_float(take("channel.f_sim"), "channel.f_sim"),
        f_rx=_parse_float(take("channel.f_rx"), "channel.f_rx"),
        t_mem=_parse_float(take("channel.t_mem"), "channel.t_mem"),
        emission_scale=_parse_float(take("channel.emission_scale"), "channel.emission_scale"),
    )
    tx = _parse_vec3(take("geometry.tx"), "geometry.tx")
    rx_keys = sorted(
        (k for k in entries if k.startswith("geometry.rx")),
        key=lambda k: int(k.removeprefix("geometry.rx")),
    )
    if not rx_keys:
        raise ConfigError("no receivers: at least geometry.rx0 is required")
    expected = [f"geometry.rx{i}" for i in range(len(rx_keys))]
    if rx_keys != expected:
        raise ConfigError(f"receiver keys must be contiguous rx0..rxN, got {rx_keys}")
    rx = tuple(_parse_vec3(entries.pop(k), k) for k in rx_keys)

    scheme = ModScheme(
        n_dim=_parse_int(take("modem.n_dim"), "modem.n_dim"),
        m_levels=_parse_int(take("modem.m_levels"), "modem.m_levels"),
        t_sym=_parse_float(take("modem.t_sym"), "modem.t_sym"),
    )
    combiners = tuple(
        CombinerKind.parse(tok) for tok in take("run.combiners").replace(",", " ").split()
    )
    cfg = SimConfig(
        channel=channel,
        geometry=Geometry(tx_pos=tx, rx_pos=rx),
        scheme=scheme,
        n_pilot=_parse_int(take("frame.n_pilot"), "frame.n_pilot"),
        n_data=_parse_int(take("frame.n_data"), "frame.n_data"),
        pilot_seed=_parse_int(take("frame.pilot_seed"), "frame.pilot_seed"),
        snr_db=_parse_float(take("run.snr_db"), "run.snr_db"),
        combiners=combiners,
        equalizer=take("run.equalizer"),
        master_seed=_parse_int(take("run.master_seed"), "run.master_seed"),
        n_trials=_parse_int(take("run.n_trials"), "run.n_trials"),
    )
    if entries:
        raise ConfigError(f"unknown config keys: {sorted(entries)}")
    return cfg


def load_config(path) -> SimConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def config_hash(cfg: SimConfig) -> str:
    """Short stable hash of the canonical serialization, for output provenance."""
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()[:12]
