import math

import numpy as np
import pytest

from mclink.channel import ChannelParams, Geometry
from mclink.combining import (
    CombinerKind,
    Weights,
    combine,
    compute_weights,
    transverse_scatter_std,
)
from mclink.errors import ConfigError, DegenerateDataError


def array_geometry(ys, x=1.0, z=1.0):
    return Geometry(tx_pos=(0.0, 0.0, z), rx_pos=tuple((x, y, z) for y in ys))


REFERENCE_PARAMS = ChannelParams(
    diffusion_coeff=6.7698e-6, mean_vel=(0.5, 0, 0), std_vel=(1e-3, 0.1, 0),
    f_sim=1000.0, f_rx=100.0, t_mem=30.0,
)


def test_kind_parse():
    assert CombinerKind.parse(" EGC ") is CombinerKind.EGC
    with pytest.raises(ConfigError):
        CombinerKind.parse("mrc")


def test_weights_validation():
    with pytest.raises(ConfigError):
        Weights(values=np.array([0.5, 0.4]))
    with pytest.raises(ConfigError):
        Weights(values=np.array([1.5, -0.5]))


def test_sc_selects_main():
    w = compute_weights(CombinerKind.SC, array_geometry([0, 1e-3, -1e-3]))
    assert np.array_equal(w.values, [1.0, 0.0, 0.0])


def test_egc_uniform():
    w = compute_weights(CombinerKind.EGC, array_geometry([0, 1e-3, -1e-3, 2e-3, -2e-3]))
    assert np.array_equal(w.values, np.full(5, 0.2))


def test_pgc_normalizes_energies():
    w = compute_weights(
        CombinerKind.PGC, array_geometry([0, 1e-3, -1e-3]), pilot_energies=np.array([2.0, 1.0, 1.0])
    )
    assert np.array_equal(w.values, [0.5, 0.25, 0.25])
    with pytest.raises(DegenerateDataError):
        compute_weights(
            CombinerKind.PGC, array_geometry([0, 1e-3, -1e-3]), pilot_energies=np.zeros(3)
        )


def test_dgc_symmetric_unimodal():
    geo = array_geometry([0, 2e-3, -2e-3])
    w = compute_weights(CombinerKind.DGC, geo, transverse_std=0.0037).values
    assert w[1] == w[2]
    assert w[0] > w[1]
    with pytest.raises(ConfigError):
        compute_weights(CombinerKind.DGC, geo, transverse_std=0.0)


def test_dgc_reference_weights():
    # oracle: evaluate exp(-y^2 / (2 sigma^2)) at the five offsets and normalize,
    # sigma = 0.1 * sqrt(2 s / 1000 Hz) = 4.4721e-3 m
    geo = array_geometry([0, 1e-3, -1e-3, 2e-3, -2e-3])
    sigma = transverse_scatter_std(REFERENCE_PARAMS, geo)
    assert sigma == pytest.approx(0.1 * math.sqrt(2.0 / 1000.0), rel=1e-12)
    raw = [math.exp(-(y**2) / (2 * sigma**2)) for y in (0, 1e-3, -1e-3, 2e-3, -2e-3)]
    oracle = np.array(raw) / sum(raw)
    np.testing.assert_allclose(
        oracle, [0.210071, 0.204884, 0.204884, 0.190080, 0.190080], atol=5e-7
    )
    w = compute_weights(CombinerKind.DGC, geo, transverse_std=sigma)
    np.testing.assert_allclose(w.values, oracle, rtol=1e-12)


def test_dgc_converges_to_egc_for_wide_scatter():
    geo = array_geometry([0, 1e-3, -1e-3, 2e-3, -2e-3])
    wide = compute_weights(CombinerKind.DGC, geo, transverse_std=1e3 * 2e-3)
    assert np.max(np.abs(wide.values - 0.2)) < 1e-6


def test_weight_normalization_property(rng):
    for _ in range(20):
        n = int(rng.integers(1, 8))
        geo = array_geometry(list(rng.normal(0, 1e-3, n)))
        energies = rng.uniform(0.1, 5.0, n)
        for kind in CombinerKind:
            w = compute_weights(kind, geo, pilot_energies=energies, transverse_std=3e-3).values
            assert abs(float(w.sum()) - 1.0) <= 1e-12
            assert np.all(w >= 0.0)


def test_permutation_equivariance(rng):
    ys = [0.0, 1e-3, -1e-3, 2e-3]
    energies = np.array([4.0, 3.0, 2.0, 1.0])
    perm = np.array([0, 2, 3, 1])  # keeps the designated main receiver first
    for kind in (CombinerKind.EGC, CombinerKind.DGC, CombinerKind.PGC):
        w = compute_weights(
            kind, array_geometry(ys), pilot_energies=energies, transverse_std=3e-3
        ).values
        w_perm = compute_weights(
            kind,
            array_geometry([ys[i] for i in perm]),
            pilot_energies=energies[perm],
            transverse_std=3e-3,
        ).values
        np.testing.assert_allclose(w_perm, w[perm], rtol=1e-12)


def test_combine_selection_and_convexity(rng):
    stack = rng.normal(size=(3, 7, 2))
    sc = compute_weights(CombinerKind.SC, array_geometry([0, 1e-3, -1e-3]))
    assert np.array_equal(combine(stack, sc), stack[0])

    w = Weights(values=np.array([0.5, 0.3, 0.2]))
    out = combine(stack, w)
    # convexity: every combined coordinate lies within the branch envelope
    assert np.all(out <= stack.max(axis=0) + 1e-15)
    assert np.all(out >= stack.min(axis=0) - 1e-15)


def test_combine_identical_branches_and_average():
    v = np.random.default_rng(0).normal(size=(1, 5, 2))
    stack = np.repeat(v, 4, axis=0)
    w = Weights(values=np.full(4, 0.25))
    np.testing.assert_allclose(combine(stack, w), v[0], rtol=1e-15)

    two = np.array([[[2.0, 0.0]], [[0.0, 2.0]]])
    assert np.array_equal(combine(two, Weights(values=np.array([0.5, 0.5]))), [[1.0, 1.0]])


def test_combine_shape_mismatch():
    with pytest.raises(ConfigError):
        combine(np.zeros((2, 5, 2)), Weights(values=np.array([1.0])))
