"""Command-line interface.

Subcommands: single-run, sweep-snr, sweep-nrx, structured-scan,
constellation. All outputs are CSV files in --out with a leading
provenance comment (config hash, seed, version, kernel backend). Exit
codes: 0 success, 2 configuration error, 3 numerical degeneracy.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .channel import propagate_frame
from .combining import CombinerKind
from .config import (
    DEFAULT_SNR_GRID,
    DEFAULT_Y_GRID,
    default_config,
    load_config,
    serialize_config,
)
from .errors import DegenerateDataError, McLinkError
from .frontend import default_sync_offset, observe
from . import harness, seeds
from .modem import frame_to_emission, generate_frame


def _parse_floats(text: str) -> list[float]:
    return [float(tok) for tok in text.replace(",", " ").split()]


def _parse_ints(text: str) -> list[int]:
    return [int(tok) for tok in text.replace(",", " ").split()]


def _build_config(args):
    cfg = load_config(args.config) if args.config else default_config()
    if args.seed is not None:
        cfg = replace(cfg, master_seed=args.seed)
    if args.trials is not None:
        cfg = replace(cfg, n_trials=args.trials)
    if args.combiners is not None:
        kinds = tuple(CombinerKind.parse(tok) for tok in args.combiners.split(","))
        cfg = replace(cfg, combiners=kinds)
    if getattr(args, "snr", None) is not None:
        cfg = replace(cfg, snr_db=args.snr)
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_single_run(args) -> None:
    cfg = _build_config(args)
    out = _out_dir(args)
    rows, trials = harness.single_run(cfg, n_workers=args.workers)
    harness.write_rate_csv(out / "single_run.csv", rows, cfg)
    if args.dump_weights:
        harness.write_weights_csv(out / "weights.csv", trials, cfg)
    if args.dump_observations or args.dump_trace:
        data_rng = seeds.stream(cfg.master_seed, 0, seeds.TAG_DATA)
        frame = generate_frame(cfg.scheme, cfg.n_pilot, cfg.n_data, cfg.pilot_seed, data_rng)
        schedule = frame_to_emission(frame, cfg.channel.f_sim, cfg.channel.emission_scale)
        vel_rng = seeds.stream(cfg.master_seed, 0, seeds.TAG_VELOCITY)
        traces = propagate_frame(schedule, cfg.geometry, cfg.channel, vel_rng)
        if args.dump_trace:
            harness.write_trace_csv(out / "trace.csv", traces, cfg)
        if args.dump_observations:
            sync = default_sync_offset(cfg.channel, cfg.geometry)
            n_symbols = cfg.n_pilot + cfg.n_data
            obs = [
                observe(tr, cfg.scheme, cfg.channel, sync, n_symbols, cfg.n_pilot, j)
                for j, tr in enumerate(traces)
            ]
            harness.write_observation_csv(out / "observations.csv", obs, cfg)
    for r in rows:
        ber = "-" if r.ber is None else f"{r.ber:.5f}"
        print(f"{r.combiner.value:>4}  snr={r.snr_db:+.1f} dB  ser={r.ser:.5f}  ber={ber}")


def _cmd_sweep_snr(args) -> None:
    cfg = _build_config(args)
    out = _out_dir(args)
    snrs = _parse_floats(args.snr_list) if args.snr_list else list(DEFAULT_SNR_GRID)
    rows = harness.sweep_snr(cfg, snrs, n_workers=args.workers)
    harness.write_rate_csv(out / "sweep_snr.csv", rows, cfg)
    print(f"wrote {out / 'sweep_snr.csv'} ({len(rows)} rows)")


def _cmd_sweep_nrx(args) -> None:
    cfg = _build_config(args)
    out = _out_dir(args)
    nrx = _parse_ints(args.nrx) if args.nrx else [1, 3, 5]
    rows, _ = harness.sweep_nrx(cfg, nrx, args.delta_y, n_workers=args.workers)
    harness.write_nrx_csv(out / "sweep_nrx.csv", rows, cfg)
    print(f"wrote {out / 'sweep_nrx.csv'} ({len(rows)} rows)")


def _cmd_structured_scan(args) -> None:
    cfg = _build_config(args)
    out = _out_dir(args)
    grid = _parse_floats(args.y_grid) if args.y_grid else list(DEFAULT_Y_GRID)
    scan = harness.structured_scan(
        cfg, grid, eta=args.eta, delta=args.delta, n_mc=args.n_mc, n_workers=args.workers
    )
    harness.write_scan_csv(out / "structured_scan.csv", scan, cfg)
    for y, p in zip(scan.y_positions, scan.prob_estimates):
        print(f"y={y:.4g} m  p_hat={p:.3f}")


def _cmd_constellation(args) -> None:
    cfg = _build_config(args)
    out = _out_dir(args)
    kind = CombinerKind.parse(args.combiner)
    vectors, decided, truth = harness.constellation_dump(cfg, kind, trial_index=args.trial)
    harness.write_constellation_csv(out / "constellation.csv", vectors, decided, truth, cfg)
    print(f"wrote {out / 'constellation.csv'} ({vectors.shape[0]} rows)")


def _cmd_print_config(args) -> None:
    cfg = _build_config(args)
    sys.stdout.write(serialize_config(cfg))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mclink",
        description="Monte Carlo link simulator for pulse-based particle communication under directed random flow",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, snr_flag=True):
        p.add_argument("--config", type=Path, default=None, help="config file (flat key=value); defaults otherwise")
        p.add_argument("--seed", type=int, default=None, help="master seed override (u64)")
        p.add_argument("--trials", type=int, default=None, help="trial count override")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--combiners", type=str, default=None, help="comma list from sc,egc,dgc,pgc")
        p.add_argument("--workers", type=int, default=None, help="parallel worker processes")
        if snr_flag:
            p.add_argument("--snr", type=float, default=None, help="SNR override in dB (inf disables noise)")

    p = sub.add_parser("single-run", help="configured trials at one SNR")
    common(p)
    p.add_argument("--dump-weights", action="store_true", help="write per-trial combiner weights")
    p.add_argument("--dump-observations", action="store_true", help="write noiseless matched-filter vectors for trial 0")
    p.add_argument("--dump-trace", action="store_true", help="write noiseless channel traces for trial 0 (large)")
    p.set_defaults(func=_cmd_single_run)

    p = sub.add_parser("sweep-snr", help="error rates versus SNR")
    common(p, snr_flag=False)
    p.add_argument("--snr-list", type=str, default=None, help="comma list of SNRs in dB")
    p.set_defaults(func=_cmd_sweep_snr)

    p = sub.add_parser("sweep-nrx", help="error rates versus receiver count")
    common(p)
    p.add_argument("--nrx", type=str, default=None, help="comma list of odd receiver counts")
    p.add_argument("--delta-y", type=float, default=0.001, help="transverse spacing in m")
    p.set_defaults(func=_cmd_sweep_nrx)

    p = sub.add_parser("structured-scan", help="structured-signal probability versus transverse offset")
    common(p)
    p.add_argument("--y-grid", type=str, default=None, help="comma list of probe offsets in m")
    p.add_argument("--eta", type=float, default=0.7, help="pilot energy ratio threshold")
    p.add_argument("--delta", type=float, default=0.1, help="misclassification allowance")
    p.add_argument("--n-mc", type=int, default=500, help="Monte Carlo trials per position")
    p.set_defaults(func=_cmd_structured_scan)

    p = sub.add_parser("constellation", help="equalized data vectors with decisions for one trial")
    common(p)
    p.add_argument("--combiner", type=str, default="egc", help="combiner to dump")
    p.add_argument("--trial", type=int, default=0, help="trial index to dump")
    p.set_defaults(func=_cmd_constellation)

    p = sub.add_parser("print-config", help="print the effective configuration")
    common(p)
    p.set_defaults(func=_cmd_print_config)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except DegenerateDataError as exc:
        print(f"error (numerical degeneracy): {exc}", file=sys.stderr)
        return 3
    except McLinkError as exc:
        print(f"error (configuration): {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
