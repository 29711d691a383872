"""Experiment orchestration: trials, sweeps, parallel execution, CSV output.

A trial is one full frame transmission evaluated by every requested
combiner on the identical channel and noise realization, so combiner
comparisons are paired. Trials are the unit of parallelism; every stream
is derived from (master seed, trial index, purpose), so concurrent and
serial execution produce identical tables and any subset of trials can be
reproduced bit-exactly.
"""

from __future__ import annotations

import datetime
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial

import numpy as np

from . import __version__, seeds
from ._kernels import BACKEND as KERNEL_BACKEND
from .channel import ConcentrationTrace, Geometry, calibrate_noise_std, propagate_frame
from .combining import CombinerKind, Weights, combine, compute_weights, transverse_scatter_std
from .config import SimConfig, config_hash, symmetric_receiver_layout
from .dsp import agc, apply_equalizer, train_mmse
from .errors import ConfigError, McLinkError
from .frontend import ReceiverObservation, default_sync_offset, observe
from .metrics import (
    DetectionResult,
    StructuredScan,
    error_rates,
    slice_symbols,
    structured_probability,
    wilson_interval,
)
from .modem import build_constellation, frame_to_emission, generate_frame


@dataclass(frozen=True)
class TrialResult:
    """Outcome of one frame transmission at one SNR."""

    trial_index: int
    snr_db: float
    detections: dict[CombinerKind, DetectionResult]
    pilot_energies: np.ndarray = field(repr=False)
    weights: dict[CombinerKind, Weights] = field(repr=False)
    agc_gains: dict[CombinerKind, float] = field(repr=False)
    equalized: dict[CombinerKind, np.ndarray] | None = field(default=None, repr=False)


@dataclass(frozen=True)
class RateRow:
    """Error rates pooled over trials for one (combiner, operating point)."""

    combiner: CombinerKind
    snr_db: float
    ser: float
    ber: float | None
    n_data: int
    n_trials: int
    symbol_errors: int
    bit_errors: int | None
    total_symbols: int
    total_bits: int | None

    def ser_interval(self) -> tuple[float, float]:
        return wilson_interval(self.symbol_errors, self.total_symbols)

    def ber_interval(self) -> tuple[float, float]:
        if self.bit_errors is None or self.total_bits is None:
            raise ConfigError("BER undefined for this modulation")
        return wilson_interval(self.bit_errors, self.total_bits)


def run_trial_multi_snr(
    config: SimConfig,
    trial_index: int,
    snr_list,
    keep_equalized: bool = False,
) -> list[TrialResult]:
    """One frame transmission evaluated at several SNRs.

    The propagation is shared: noise is sigma * (per-receiver unit normals
    drawn once), which reproduces single-SNR runs bit-exactly because the
    noise stream is keyed by (seed, trial, receiver position) and consumed
    identically.
    """
    try:
        return _run_trial_multi_snr(config, trial_index, snr_list, keep_equalized)
    except McLinkError as exc:
        raise type(exc)(f"trial {trial_index}: {exc}") from exc


def _run_trial_multi_snr(config, trial_index, snr_list, keep_equalized):
    params = config.channel
    geometry = config.geometry
    scheme = config.scheme
    master = config.master_seed
    n_pilot, n_data = config.n_pilot, config.n_data
    n_symbols = n_pilot + n_data

    data_rng = seeds.stream(master, trial_index, seeds.TAG_DATA)
    frame = generate_frame(scheme, n_pilot, n_data, config.pilot_seed, data_rng)
    schedule = frame_to_emission(frame, params.f_sim, params.emission_scale)
    vel_rng = seeds.stream(master, trial_index, seeds.TAG_VELOCITY)
    traces = propagate_frame(schedule, geometry, params, vel_rng)

    sync = default_sync_offset(params, geometry)
    span = (sync, sync + n_pilot * scheme.t_sym)
    constellation = build_constellation(scheme.n_dim, scheme.m_levels)
    pilot_truth = constellation.amplitudes(frame.pilot_symbols)
    dgc_std = (
        transverse_scatter_std(params, geometry)
        if CombinerKind.DGC in config.combiners
        else None
    )

    unit_noise: list[np.ndarray | None] = [None] * geometry.n_rx
    results = []
    for snr_db in snr_list:
        noise_std = calibrate_noise_std(traces[0], float(snr_db), pilot_span=span)
        observations: list[ReceiverObservation] = []
        for j, trace in enumerate(traces):
            if noise_std == 0.0:
                noisy = trace
            else:
                if unit_noise[j] is None:
                    rng = seeds.noise_stream(master, trial_index, geometry.rx_pos[j])
                    unit_noise[j] = rng.standard_normal(trace.n_ticks)
                noisy = ConcentrationTrace(trace.f_sim, trace.values + noise_std * unit_noise[j])
            observations.append(observe(noisy, scheme, params, sync, n_symbols, n_pilot, j))

        energies = np.array([o.pilot_energy for o in observations])
        raw = np.stack([o.symbol_vectors for o in observations])

        detections: dict[CombinerKind, DetectionResult] = {}
        weights_used: dict[CombinerKind, Weights] = {}
        gains: dict[CombinerKind, float] = {}
        equalized: dict[CombinerKind, np.ndarray] | None = {} if keep_equalized else None
        for kind in config.combiners:
            w = compute_weights(kind, geometry, pilot_energies=energies, transverse_std=dgc_std)
            # combining acts on raw matched-filter outputs; gain control and
            # equalization sit behind the combiner, so branches without
            # structured signal contribute only their (small) raw noise
            combined, gain = agc(combine(raw, w), pilot_truth, n_pilot)
            gains[kind] = gain
            if config.equalizer == "affine-mmse":
                eq = train_mmse(combined[:n_pilot], pilot_truth)
                vectors = apply_equalizer(eq, combined)
            else:
                vectors = combined
            data_vectors = vectors[n_pilot:]
            decided = slice_symbols(data_vectors, scheme) if n_data else np.zeros(0, dtype=np.int64)
            detections[kind] = error_rates(decided, frame.data_symbols, scheme)
            weights_used[kind] = w
            if equalized is not None:
                equalized[kind] = data_vectors
        results.append(
            TrialResult(
                trial_index=trial_index,
                snr_db=float(snr_db),
                detections=detections,
                pilot_energies=energies,
                weights=weights_used,
                agc_gains=gains,
                equalized=equalized,
            )
        )
    return results


def run_trial(config: SimConfig, trial_index: int, keep_equalized: bool = False) -> TrialResult:
    """One frame transmission at the configured SNR."""
    return run_trial_multi_snr(config, trial_index, [config.snr_db], keep_equalized)[0]


# ---------------------------------------------------------------------------
# Parallel execution
# ---------------------------------------------------------------------------


def _multi_snr_task(args):
    config, trial_index, snr_list, keep = args
    return run_trial_multi_snr(config, trial_index, snr_list, keep_equalized=keep)


def _parallel_map(fn, tasks, n_workers):
    if n_workers is None:
        n_workers = os.cpu_count() or 1
    if n_workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(fn, tasks, chunksize=1))


def run_trials(
    config: SimConfig,
    snr_list=None,
    n_workers: int | None = None,
    keep_equalized: bool = False,
) -> list[list[TrialResult]]:
    """All configured trials; returns per-trial lists, one TrialResult per SNR."""
    snrs = tuple(snr_list) if snr_list is not None else (config.snr_db,)
    tasks = [(config, t, snrs, keep_equalized) for t in range(config.n_trials)]
    return _parallel_map(_multi_snr_task, tasks, n_workers)


def pool_rates(trials: list[TrialResult], kind: CombinerKind, config: SimConfig) -> RateRow:
    """Pool one combiner's error counts over trials (all at the same SNR)."""
    dets = [t.detections[kind] for t in trials]
    total_symbols = sum(d.n_symbols for d in dets)
    symbol_errors = sum(d.symbol_errors for d in dets)
    bits = dets[0].bits_per_symbol if dets else None
    if bits is not None:
        bit_errors = sum(d.bit_errors for d in dets)
        total_bits = total_symbols * bits
        ber = bit_errors / total_bits if total_bits else 0.0
    else:
        bit_errors = None
        total_bits = None
        ber = None
    return RateRow(
        combiner=kind,
        snr_db=trials[0].snr_db if trials else config.snr_db,
        ser=symbol_errors / total_symbols if total_symbols else 0.0,
        ber=ber,
        n_data=config.n_data,
        n_trials=len(trials),
        symbol_errors=symbol_errors,
        bit_errors=bit_errors,
        total_symbols=total_symbols,
        total_bits=total_bits,
    )


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


def single_run(config: SimConfig, n_workers: int | None = None) -> tuple[list[RateRow], list[TrialResult]]:
    """Configured trials at the configured SNR, pooled per combiner."""
    per_trial = run_trials(config, n_workers=n_workers)
    trials = [r[0] for r in per_trial]
    rows = [pool_rates(trials, kind, config) for kind in config.combiners]
    return rows, trials


def sweep_snr(config: SimConfig, snr_list, n_workers: int | None = None) -> list[RateRow]:
    """Error rates versus SNR; every SNR point reuses the same propagations."""
    snrs = tuple(float(s) for s in snr_list)
    if not snrs:
        raise ConfigError("snr_list must be nonempty")
    per_trial = run_trials(config, snr_list=snrs, n_workers=n_workers)
    rows = []
    for si in range(len(snrs)):
        at_snr = [per_trial[t][si] for t in range(len(per_trial))]
        for kind in config.combiners:
            rows.append(pool_rates(at_snr, kind, config))
    return rows


def nrx_geometry(config: SimConfig, n_rx: int, delta_y: float) -> Geometry:
    main = config.geometry.rx_pos[0]
    return Geometry(
        tx_pos=config.geometry.tx_pos,
        rx_pos=symmetric_receiver_layout(main[0], main[2], n_rx, delta_y),
    )


def sweep_nrx(
    config: SimConfig,
    nrx_list,
    delta_y: float,
    n_workers: int | None = None,
) -> tuple[list[tuple[int, RateRow]], dict[int, list[TrialResult]]]:
    """Error rates versus receiver count at symmetric transverse spacing.

    Trials with the same index share velocity, data, and per-position noise
    across receiver counts, so cross-count comparisons are paired.
    """
    rows = []
    trials_by_nrx: dict[int, list[TrialResult]] = {}
    for n_rx in nrx_list:
        cfg_n = replace(config, geometry=nrx_geometry(config, int(n_rx), delta_y))
        trials = [r[0] for r in run_trials(cfg_n, n_workers=n_workers)]
        trials_by_nrx[int(n_rx)] = trials
        for kind in config.combiners:
            rows.append((int(n_rx), pool_rates(trials, kind, cfg_n)))
    return rows, trials_by_nrx


def structured_scan(
    config: SimConfig,
    y_grid,
    eta: float,
    delta: float,
    n_mc: int,
    n_workers: int | None = None,
    master_seed: int | None = None,
) -> StructuredScan:
    """Structured-signal probability estimates over a transverse probe grid."""
    if not 0 < delta < 1:
        raise ConfigError(f"delta must lie in (0, 1), got {delta}")
    master = config.master_seed if master_seed is None else int(master_seed)
    grid = tuple(float(y) for y in y_grid)
    if not grid:
        raise ConfigError("y_grid must be nonempty")
    if n_workers is None:
        n_workers = os.cpu_count() or 1

    probs = []
    if n_workers > 1 and n_mc > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            map_fn = partial(pool.map, chunksize=8)
            for y in grid:
                probs.append(structured_probability(y, config, eta, n_mc, master, map_fn=map_fn))
    else:
        for y in grid:
            probs.append(structured_probability(y, config, eta, n_mc, master))

    ci = [wilson_interval(int(round(p * n_mc)), n_mc) for p in probs]
    return StructuredScan(
        y_positions=grid,
        prob_estimates=tuple(probs),
        ci_lo=tuple(c[0] for c in ci),
        ci_hi=tuple(c[1] for c in ci),
        eta=float(eta),
        delta=float(delta),
        n_mc=int(n_mc),
    )


def constellation_dump(config: SimConfig, kind: CombinerKind, trial_index: int = 0):
    """Equalized data-symbol vectors with decisions and truth for one trial."""
    if kind not in config.combiners:
        config = replace(config, combiners=tuple(config.combiners) + (kind,))
    trial = run_trial(config, trial_index, keep_equalized=True)
    vectors = trial.equalized[kind]
    decided = trial.detections[kind].decided_indices
    data_rng = seeds.stream(config.master_seed, trial_index, seeds.TAG_DATA)
    frame = generate_frame(config.scheme, config.n_pilot, config.n_data, config.pilot_seed, data_rng)
    return vectors, decided, frame.data_symbols


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):  # also catches numpy float64, normalized below
        return repr(float(value))
    return str(value)


def provenance_lines(config: SimConfig) -> list[str]:
    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    return [
        f"# config_hash={config_hash(config)} seed={config.master_seed} version={__version__} kernel={KERNEL_BACKEND}",
        f"# generated={stamp}",
    ]


def write_csv(path, header: list[str], rows, config: SimConfig) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in provenance_lines(config):
            fh.write(line + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_rate_csv(path, rows: list[RateRow], config: SimConfig) -> None:
    write_csv(
        path,
        ["combiner", "snr_db", "ser", "ber", "n_data", "n_trials"],
        [(r.combiner.value, r.snr_db, r.ser, r.ber, r.n_data, r.n_trials) for r in rows],
        config,
    )


def write_nrx_csv(path, rows: list[tuple[int, RateRow]], config: SimConfig) -> None:
    write_csv(
        path,
        ["n_rx", "combiner", "snr_db", "ser", "ber", "n_data", "n_trials"],
        [(n, r.combiner.value, r.snr_db, r.ser, r.ber, r.n_data, r.n_trials) for n, r in rows],
        config,
    )


def write_scan_csv(path, scan: StructuredScan, config: SimConfig) -> None:
    target = 1.0 - scan.delta
    write_csv(
        path,
        ["y_m", "p_hat", "ci_lo", "ci_hi", "n_mc", "eta", "target_level"],
        [
            (y, p, lo, hi, scan.n_mc, scan.eta, target)
            for y, p, lo, hi in zip(scan.y_positions, scan.prob_estimates, scan.ci_lo, scan.ci_hi)
        ],
        config,
    )


def write_constellation_csv(path, vectors, decided, truth, config: SimConfig) -> None:
    n_dim = vectors.shape[1]
    header = [f"dim{i}" for i in range(n_dim)] + ["decided", "truth"]
    rows = [tuple(float(v) for v in vec) + (int(d), int(t)) for vec, d, t in zip(vectors, decided, truth)]
    write_csv(path, header, rows, config)


def write_weights_csv(path, trials: list[TrialResult], config: SimConfig) -> None:
    rows = []
    for t in trials:
        for kind, w in t.weights.items():
            for j, v in enumerate(w.values):
                rows.append((t.trial_index, kind.value, j, float(v)))
    write_csv(path, ["trial", "combiner", "rx", "weight"], rows, config)


def write_observation_csv(path, observations: list[ReceiverObservation], config: SimConfig) -> None:
    n_dim = observations[0].symbol_vectors.shape[1]
    header = ["rx", "symbol_index"] + [f"dim{i}" for i in range(n_dim)]
    rows = []
    for obs in observations:
        for k, vec in enumerate(obs.symbol_vectors):
            rows.append((obs.rx_index, k) + tuple(float(v) for v in vec))
    write_csv(path, header, rows, config)


def write_trace_csv(path, traces: list[ConcentrationTrace], config: SimConfig) -> None:
    """Channel traces, one row per tick, concentrations in 9-significant-digit scientific."""
    header = ["t_s"] + [f"rx{j}" for j in range(len(traces))]
    dt = 1.0 / traces[0].f_sim
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in provenance_lines(config):
            fh.write(line + "\n")
        fh.write(",".join(header) + "\n")
        values = np.stack([t.values for t in traces])
        for n in range(values.shape[1]):
            cells = ",".join(f"{values[j, n]:.8e}" for j in range(values.shape[0]))
            fh.write(f"{n * dt:.6f},{cells}\n")
