"""Shared fixtures: small datasets and fast solver settings."""

import numpy as np
import pytest

from src.data.models import Dataset
from src.data.synthetic import generate_synthetic, three_trend
from src.utils.config import HetGpConfig, OmgpConfig, OptimizerConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def fast_opt():
    return OptimizerConfig(restarts=1, max_iter=40)


@pytest.fixture
def fast_omgp_config(fast_opt):
    return OmgpConfig(
        max_em=6,
        max_inner=30,
        m_step=fast_opt,
        het=HetGpConfig(
            samples=50,
            max_outer=2,
            optimizer=fast_opt,
            noise_optimizer=OptimizerConfig(restarts=1, max_iter=40),
        ),
    )


@pytest.fixture
def three_trend_data():
    return generate_synthetic(three_trend(n_points=240, seed=7))


@pytest.fixture
def two_line_data():
    """Two well-separated horizontal lines, interleaved in x."""
    gen = np.random.default_rng(3)
    x = np.sort(gen.uniform(-1.0, 1.0, size=60))
    labels = np.arange(60) % 2
    y = np.where(labels == 0, 1.0, -1.0) + 0.05 * gen.standard_normal(60)
    return Dataset(x=x, y=y, labels=labels)


@pytest.fixture
def smooth_data():
    """Single smooth curve with mild noise."""
    gen = np.random.default_rng(11)
    x = np.sort(gen.uniform(-2.0, 2.0, size=80))
    y = np.sin(1.5 * x) + 0.05 * gen.standard_normal(80)
    return Dataset(x=x, y=y)
