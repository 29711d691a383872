#!/usr/bin/env python3
"""Benchmark the channel superposition kernel: compiled extension vs numpy fallback.

Runs the identical workload (one pilot frame at the reference channel
parameters, five receivers) through both backends and reports wall time,
speedup, and the maximum relative difference between outputs.

    python benchmarks/bench_channel_kernel.py --pilots 8 --repeat 3
"""

import argparse
import math
import time

import numpy as np

from mclink._kernels import HAVE_COMPILED, get_backend
from mclink.channel import sample_velocity_trace
from mclink.config import default_config
from mclink.modem import frame_to_emission, generate_frame


def build_workload(n_pilot: int):
    cfg = default_config()
    params = cfg.channel
    frame = generate_frame(cfg.scheme, n_pilot, 0, cfg.pilot_seed, np.random.default_rng(0))
    schedule = frame_to_emission(frame, params.f_sim, params.emission_scale)
    seconds = math.ceil(schedule.frame_duration + params.t_mem)
    vel = sample_velocity_trace(params, float(seconds), np.random.default_rng(1))
    n_ticks = int(round(seconds * params.f_sim))
    disp_x = np.concatenate(([0.0], vel.cum_displacement[:, 0]))
    disp_y = np.concatenate(([0.0], vel.cum_displacement[:, 1]))
    tx = cfg.geometry.tx_pos
    dy = np.array([p[1] - tx[1] for p in cfg.geometry.rx_pos])
    dz = np.array([p[2] - tx[2] for p in cfg.geometry.rx_pos])
    args = dict(
        amps=schedule.amplitudes * params.dt,
        disp_x=disp_x,
        disp_y=disp_y,
        dt=params.dt,
        diffusion=params.diffusion_coeff,
        t_mem=params.t_mem,
        mem_ticks=params.mem_ticks,
        dx=cfg.geometry.rx_pos[0][0] - tx[0],
        dy=dy,
        dz=dz,
        n_out=n_ticks,
        monotone_x=bool(np.all(vel.samples[:, 0] > 0.0)),
    )
    return args, n_ticks


def run(backend_name: str, args: dict, repeat: int):
    backend = get_backend(backend_name)
    cutoff = get_backend("python").EXPONENT_CUTOFF
    best = math.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = backend.superpose_emissions(
            args["amps"], args["disp_x"], args["disp_y"], args["dt"], args["diffusion"],
            args["t_mem"], args["mem_ticks"], args["dx"], args["dy"], args["dz"],
            args["n_out"], args["monotone_x"], cutoff,
        )
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--pilots", type=int, default=8, help="pilot symbols in the benchmark frame")
    parser.add_argument("--repeat", type=int, default=3, help="timing repetitions (best of)")
    opts = parser.parse_args()

    args, n_ticks = build_workload(opts.pilots)
    print(f"workload: {args['amps'].size} emission ticks -> {n_ticks} output ticks x {args['dy'].size} receivers")

    t_py, out_py = run("python", args, opts.repeat)
    print(f"python   kernel: {t_py:8.3f} s")
    if HAVE_COMPILED:
        t_c, out_c = run("compiled", args, opts.repeat)
        scale = np.max(np.abs(out_py)) or 1.0
        rel = np.max(np.abs(out_py - out_c)) / scale
        print(f"compiled kernel: {t_c:8.3f} s   speedup x{t_py / t_c:.1f}   max rel diff {rel:.2e}")
    else:
        print("compiled kernel: not built")


if __name__ == "__main__":
    main()
