"""Acceptance gate: the six reproduction and property criteria.

Error-rate uncertainty uses frame-level 95% t-intervals (symbols within a
frame share one flow realization, so frames are the independent unit);
structured-scan probabilities use Wilson intervals (trials there are
independent Bernoulli draws). Combiner comparisons within a trial are
paired by construction and tested with an exact sign test over frames.

Each criterion prints one PASS line; run with `pytest tests/test_acceptance.py -v -s`.
The full module takes roughly half an hour on two cores.
"""

import math
from dataclasses import replace

import numpy as np
import pytest

from mclink import harness
from mclink.channel import Geometry, impulse_concentration, sample_velocity_trace
from mclink.cli import main as cli_main
from mclink.combining import CombinerKind, compute_weights
from mclink.config import DEFAULT_SNR_GRID, DEFAULT_Y_GRID, default_config, serialize_config
from mclink.dsp import train_mmse
from mclink.metrics import slice_symbols
from mclink.modem import ModScheme, build_constellation, pulse_value

from oracles import frame_interval, intervals_overlap, sign_test_p

WORKERS = 2
MODULATIONS = [
    ModScheme(2, 4, 2.0),
    ModScheme(3, 3, 2.01),  # t_sym stretched 0.5% so subintervals fit the tick grids
    ModScheme(3, 4, 2.01),
    ModScheme(4, 2, 2.0),
]
MULTI = (CombinerKind.EGC, CombinerKind.DGC, CombinerKind.PGC)


def per_frame(trials, kind, attr="ber"):
    return [getattr(t.detections[kind], attr) for t in trials]


# ---------------------------------------------------------------------------
# criterion 1: five-receiver array at -5 dB, (N,M) = (2,4)
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def reference_trials():
    cfg = default_config()  # 20 trials, -5 dB, receivers at {0, +-1, +-2} mm
    return cfg, [r[0] for r in harness.run_trials(cfg, n_workers=WORKERS)]


def test_criterion_1_reference_operating_point(reference_trials):
    cfg, trials = reference_trials
    pooled = {k: harness.pool_rates(trials, k, cfg) for k in cfg.combiners}
    sc = pooled[CombinerKind.SC].ber
    assert 0.08 <= sc <= 0.25

    sc_frames = per_frame(trials, CombinerKind.SC)
    for kind in MULTI:
        alt = pooled[kind].ber
        assert alt < sc
        alt_frames = per_frame(trials, kind)
        wins = sum(a < s for a, s in zip(alt_frames, sc_frames))
        losses = sum(a > s for a, s in zip(alt_frames, sc_frames))
        assert sign_test_p(wins, losses) < 0.01

    egc_iv = frame_interval(per_frame(trials, CombinerKind.EGC))
    dgc_iv = frame_interval(per_frame(trials, CombinerKind.DGC))
    assert egc_iv[0] <= pooled[CombinerKind.DGC].ber <= egc_iv[1]
    assert dgc_iv[0] <= pooled[CombinerKind.EGC].ber <= dgc_iv[1]
    print(
        f"\nACCEPTANCE 1: BER sc={sc:.4f} egc={pooled[CombinerKind.EGC].ber:.4f} "
        f"dgc={pooled[CombinerKind.DGC].ber:.4f} pgc={pooled[CombinerKind.PGC].ber:.4f}: PASS"
    )


# ---------------------------------------------------------------------------
# criterion 2: structured-signal probability scan
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def probability_scan():
    cfg = default_config()
    return harness.structured_scan(
        cfg, DEFAULT_Y_GRID, eta=0.7, delta=0.1, n_mc=500, n_workers=WORKERS
    )


def test_criterion_2_structured_scan(probability_scan):
    scan = probability_scan
    p = dict(zip(scan.y_positions, scan.prob_estimates))
    assert p[0.0] == 1.0
    assert p[0.001] >= 1.0 - scan.delta
    assert p[0.05] < 0.5
    half = [(hi - lo) / 2 for lo, hi in zip(scan.ci_lo, scan.ci_hi)]
    for i in range(len(scan.y_positions) - 1):
        assert scan.prob_estimates[i + 1] <= scan.prob_estimates[i] + half[i] + half[i + 1]
    # outward-scan critical distance on the same estimates: the side-receiver
    # offsets used throughout (1 and 2 mm) must lie inside the structured zone
    y_c = 0.0
    for y, prob in zip(scan.y_positions, scan.prob_estimates):
        if prob >= 1.0 - scan.delta:
            y_c = y
        else:
            break
    assert y_c >= 0.002
    print(
        f"\nACCEPTANCE 2: p(0)={p[0.0]} p(1mm)={p[0.001]:.3f} p(50mm)={p[0.05]:.3f} "
        f"y_c={y_c} m: PASS"
    )


# ---------------------------------------------------------------------------
# criterion 3: SER versus SNR for four modulations
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def snr_tables():
    tables = {}
    for scheme in MODULATIONS:
        cfg = replace(default_config(), scheme=scheme, n_trials=12)
        per_trial = harness.run_trials(cfg, snr_list=DEFAULT_SNR_GRID, n_workers=WORKERS)
        tables[scheme] = (cfg, per_trial)
    return tables


def test_criterion_3_snr_trends(snr_tables):
    for scheme, (cfg, per_trial) in snr_tables.items():
        by_snr = {
            snr: [pt[i] for pt in per_trial] for i, snr in enumerate(DEFAULT_SNR_GRID)
        }
        for kind in cfg.combiners:
            ivs = [frame_interval(per_frame(by_snr[s], kind, "ser")) for s in DEFAULT_SNR_GRID]
            means = [float(np.mean(per_frame(by_snr[s], kind, "ser"))) for s in DEFAULT_SNR_GRID]
            for i in range(len(means) - 1):
                slack = (ivs[i][1] - ivs[i][0]) / 2 + (ivs[i + 1][1] - ivs[i + 1][0]) / 2
                assert means[i + 1] <= means[i] + slack, (scheme, kind, DEFAULT_SNR_GRID[i])
        for snr in (-10.0, -5.0):
            pooled = {k: harness.pool_rates(by_snr[snr], k, cfg) for k in cfg.combiners}
            for kind in MULTI:
                assert pooled[kind].ser <= pooled[CombinerKind.SC].ser, (scheme, kind, snr)
        ivs10 = {
            k: frame_interval(per_frame(by_snr[10.0], k, "ser")) for k in cfg.combiners
        }
        for a in cfg.combiners:
            for b in cfg.combiners:
                assert intervals_overlap(ivs10[a], ivs10[b]), (scheme, a, b)
        floor = np.mean(per_frame(by_snr[10.0], CombinerKind.SC, "ser"))
        print(
            f"\nACCEPTANCE 3 ({scheme.n_dim},{scheme.m_levels}): monotone, "
            f"diversity holds at -10/-5 dB, converged at +10 dB (sc ser {floor:.3f}): PASS"
        )


# ---------------------------------------------------------------------------
# criterion 4: receiver-count trends in both regimes
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def nrx_tables():
    cfg = default_config()
    out = {}
    for dy in (0.001, 0.05):
        _, by_nrx = harness.sweep_nrx(cfg, [1, 5], dy, n_workers=WORKERS)
        out[dy] = (cfg, by_nrx)
    return out


def test_criterion_4_receiver_count(nrx_tables):
    _, structured = nrx_tables[0.001]
    tight1 = per_frame(structured[1], CombinerKind.EGC)
    tight5 = per_frame(structured[5], CombinerKind.EGC)
    wins = sum(a < b for a, b in zip(tight5, tight1))
    losses = sum(a > b for a, b in zip(tight5, tight1))
    assert np.mean(tight5) < np.mean(tight1)
    assert sign_test_p(wins, losses) < 0.01

    cfg, scattered = nrx_tables[0.05]
    wide1 = harness.pool_rates(scattered[1], CombinerKind.EGC, cfg).ber
    wide5 = harness.pool_rates(scattered[5], CombinerKind.EGC, cfg).ber
    assert wide5 > wide1
    pgc5 = harness.pool_rates(scattered[5], CombinerKind.PGC, cfg).ber
    sc5 = harness.pool_rates(scattered[5], CombinerKind.SC, cfg).ber
    assert pgc5 <= 1.5 * sc5
    print(
        f"\nACCEPTANCE 4: structured egc {np.mean(tight1):.4f}->{np.mean(tight5):.4f} (n_rx 1->5); "
        f"scattered egc {wide1:.4f}->{wide5:.4f}, pgc {pgc5:.4f} vs sc {sc5:.4f}: PASS"
    )


# ---------------------------------------------------------------------------
# criterion 5: exact property suites
# ---------------------------------------------------------------------------


def test_criterion_5_mass_conservation():
    params = replace(
        default_config().channel, diffusion_coeff=5e-4, mean_vel=(0.3, 0.1, 0.0),
        std_vel=(0.05, 0.08, 0.0), f_sim=50.0, f_rx=50.0,
    )
    trace = sample_velocity_trace(params, 30.0, np.random.default_rng(3))
    times, disp = trace.displacement_knots()
    tx = np.array([0.0, 0.0, 1.0])
    nodes, weights = np.polynomial.legendre.leggauss(32)
    worst = 0.0
    for tau in (0.5, 2.0, 30.0):
        sigma = math.sqrt(2 * params.diffusion_coeff * tau)
        center = tx + np.array([np.interp(tau, times, disp[:, ax]) for ax in range(3)])
        half = 6.5 * sigma
        pts = center[:, None] + half * nodes[None, :]
        w = half * weights
        total = 0.0
        for ix in range(32):
            for iy in range(32):
                line = np.array(
                    [
                        impulse_concentration(
                            params, tuple(tx), (pts[0, ix], pts[1, iy], z), 0.0, trace, tau
                        )
                        for z in pts[2]
                    ]
                )
                total += w[ix] * w[iy] * float(line @ w)
        worst = max(worst, abs(total - 1.0))
    assert worst <= 1e-6
    print(f"\nACCEPTANCE 5a: kernel mass conserved (worst rel err {worst:.2e}): PASS")


def test_criterion_5_pulse_orthogonality():
    scheme = ModScheme(4, 2, 2.0)
    f_sim = 500.0
    ts = np.arange(int(scheme.t_sym * f_sim)) / f_sim
    pulses = np.array([[pulse_value(i, t, scheme) for t in ts] for i in range(4)])
    gram = pulses @ pulses.T
    assert np.array_equal(gram, np.diag(np.full(4, scheme.t_sub * f_sim)))
    print("\nACCEPTANCE 5b: pulse basis exactly orthogonal: PASS")


def test_criterion_5_weight_normalization():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(1, 9))
        geo = Geometry(
            tx_pos=(0, 0, 1), rx_pos=tuple((1.0, y, 1.0) for y in rng.normal(0, 2e-3, n))
        )
        for kind in CombinerKind:
            w = compute_weights(
                kind, geo, pilot_energies=rng.uniform(0.01, 9.0, n), transverse_std=4.5e-3
            ).values
            assert abs(float(w.sum()) - 1.0) <= 1e-12
            assert np.all(w >= 0)
    print("\nACCEPTANCE 5c: weights normalized to 1e-12, nonnegative: PASS")


def test_criterion_5_sc_equals_single_receiver(small_cfg):
    full = harness.run_trial(small_cfg, 0)
    solo_cfg = replace(
        small_cfg,
        geometry=Geometry(tx_pos=small_cfg.geometry.tx_pos, rx_pos=small_cfg.geometry.rx_pos[:1]),
        combiners=(CombinerKind.SC,),
    )
    solo = harness.run_trial(solo_cfg, 0)
    assert np.array_equal(
        full.detections[CombinerKind.SC].decided_indices,
        solo.detections[CombinerKind.SC].decided_indices,
    )
    assert full.agc_gains[CombinerKind.SC] == solo.agc_gains[CombinerKind.SC]
    print("\nACCEPTANCE 5d: SC pipeline bit-identical to single-receiver run: PASS")


def test_criterion_5_slicer_equals_brute_force():
    rng = np.random.default_rng(99)
    total = 0
    for scheme in MODULATIONS:
        c = build_constellation(scheme.n_dim, scheme.m_levels)
        points = c.amplitudes(np.arange(c.points.shape[0]))
        assert np.array_equal(slice_symbols(points, scheme), np.arange(len(points)))
        vecs = points[rng.integers(0, len(points), 2500)] + rng.uniform(
            -0.75 * scheme.m_levels, 0.75 * scheme.m_levels, (2500, scheme.n_dim)
        )
        d2 = ((vecs[:, None, :] - points[None, :, :]) ** 2).sum(axis=2)
        assert np.array_equal(slice_symbols(vecs, scheme), np.argmin(d2, axis=1))
        total += 2500
    print(f"\nACCEPTANCE 5e: slicer == minimum distance on {total} perturbations: PASS")


def test_criterion_5_mmse_recovers_inverse():
    rng = np.random.default_rng(11)
    c = build_constellation(4, 2)
    a = c.amplitudes(rng.integers(0, 16, 40))
    r = np.eye(4) + 0.5 * rng.normal(size=(4, 4))
    eq = train_mmse(a @ r.T, a, ridge=0.0)
    err = np.max(np.abs(eq.matrix @ r - np.eye(4)))
    assert err <= 1e-8
    print(f"\nACCEPTANCE 5f: equalizer inverts random 4x4 mixing (err {err:.1e}): PASS")


def test_criterion_5_byte_identical_reruns(tmp_path, small_cfg):
    cfg_path = tmp_path / "cfg.txt"
    cfg_path.write_text(serialize_config(replace(small_cfg, n_trials=3)))

    def run(tag):
        out = tmp_path / tag
        base = ["--config", str(cfg_path), "--out", str(out), "--workers", str(WORKERS)]
        assert cli_main(["single-run", *base, "--dump-weights"]) == 0
        assert cli_main(["sweep-snr", *base, "--snr-list", "3,8"]) == 0
        assert cli_main(["sweep-nrx", *base, "--nrx", "1,3", "--delta-y", "0.001"]) == 0
        assert cli_main(["structured-scan", *base, "--y-grid", "0,0.001", "--n-mc", "6"]) == 0
        assert cli_main(["constellation", *base, "--combiner", "pgc"]) == 0
        blobs = {}
        for path in sorted(out.iterdir()):
            lines = path.read_text().splitlines()
            blobs[path.name] = [l for l in lines if not l.startswith("# generated=")]
        return blobs

    assert run("a") == run("b")
    print("\nACCEPTANCE 5g: CSV outputs byte-identical across reruns (sans timestamp): PASS")


# ---------------------------------------------------------------------------
# criterion 6: analytic displacement oracle
# ---------------------------------------------------------------------------


def test_criterion_6_transverse_displacement_std():
    params = default_config().channel
    rng = np.random.default_rng(2024)
    finals = np.array(
        [sample_velocity_trace(params, 2.0, rng).cum_displacement[-1, 1] for _ in range(10_000)]
    )
    expected = params.std_vel[1] * math.sqrt(2.0 * params.dt)
    got = float(np.std(finals))
    assert abs(got - expected) < 0.05 * expected
    print(f"\nACCEPTANCE 6: transverse scatter std {got:.3e} vs closed form {expected:.3e}: PASS")
