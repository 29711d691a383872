import numpy as np
import pytest

from mclink.channel import ChannelParams, Geometry
from mclink.combining import CombinerKind
from mclink.config import SimConfig
from mclink.modem import ModScheme


@pytest.fixture
def small_cfg():
    """Fast downscaled link: 5 cm hop, 0.1 s symbols, 3 receivers, ~2k ticks/frame."""
    channel = ChannelParams(
        diffusion_coeff=6.7698e-6,
        mean_vel=(0.5, 0.0, 0.0),
        std_vel=(1e-3, 0.1, 0.0),
        f_sim=500.0,
        f_rx=100.0,
        t_mem=1.0,
        emission_scale=1.0,
    )
    geometry = Geometry(
        tx_pos=(0.0, 0.0, 0.5),
        rx_pos=((0.05, 0.0, 0.5), (0.05, 0.001, 0.5), (0.05, -0.001, 0.5)),
    )
    return SimConfig(
        channel=channel,
        geometry=geometry,
        scheme=ModScheme(n_dim=2, m_levels=4, t_sym=0.1),
        n_pilot=6,
        n_data=20,
        pilot_seed=77,
        snr_db=5.0,
        combiners=(CombinerKind.SC, CombinerKind.EGC, CombinerKind.DGC, CombinerKind.PGC),
        equalizer="affine-mmse",
        master_seed=3,
        n_trials=2,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(123)
