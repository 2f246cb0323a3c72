"""Labeled synthetic power-curve scenarios."""

import logging

import numpy as np

from ..core.functions import ConstantMean, SoftClipMean
from .models import ComponentSpec, Dataset, NoiseProfile, NormStats, SynthConfig

logger = logging.getLogger(__name__)

# Model coordinates map to wind = 7 + 4x m/s and power = 2000 y kW
PHYSICAL_SCALE = NormStats(x_mean=7.0, x_std=4.0, y_mean=0.0, y_std=2000.0)

# Noise grows around the knee of the curve and is low on the tails
BELL_NOISE = NoiseProfile(floor_std=0.01, peak_std=0.05, center=-0.25, width=0.6)
ZERO_NOISE = NoiseProfile(floor_std=0.02)


def ideal_curve() -> ComponentSpec:
    return ComponentSpec(SoftClipMean(alpha1=1.0, alpha2=0.4, alpha3=0.6, beta=10.0), BELL_NOISE)


def curtailed_curve(level: float, beta: float) -> ComponentSpec:
    return ComponentSpec(SoftClipMean(alpha1=level, alpha2=0.4, alpha3=0.6, beta=beta), BELL_NOISE)


def zero_power() -> ComponentSpec:
    return ComponentSpec(ConstantMean(level=0.0), ZERO_NOISE)


def three_trend(n_points: int = 3000, seed: int = 0) -> SynthConfig:
    """Ideal curve, 50% curtailment and zero-power downtime."""
    return SynthConfig(
        n_points=n_points,
        component_weights=(0.5, 0.3, 0.2),
        component_specs=(ideal_curve(), curtailed_curve(0.5, 30.0), zero_power()),
        seed=seed,
        norm_stats=PHYSICAL_SCALE,
    )


def four_trend(n_points: int = 3000, seed: int = 0) -> SynthConfig:
    """Three-trend scenario plus an 80% curtailment branch."""
    return SynthConfig(
        n_points=n_points,
        component_weights=(0.4, 0.2, 0.25, 0.15),
        component_specs=(
            ideal_curve(),
            curtailed_curve(0.8, 20.0),
            curtailed_curve(0.5, 30.0),
            zero_power(),
        ),
        seed=seed,
        norm_stats=PHYSICAL_SCALE,
    )


PRESETS = {
    "three-trend": three_trend,
    "four-trend": four_trend,
}


def generate_synthetic(cfg: SynthConfig) -> Dataset:
    """
    Draw a labeled dataset from a synthetic scenario.

    Inputs are uniform on ``x_range``; each point picks a component by the
    weights and gets that component's mean plus Gaussian noise of its
    input-dependent std. Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.x_range
    x = rng.uniform(lo, hi, size=cfg.n_points)
    weights = np.asarray(cfg.component_weights, dtype=float)
    labels = rng.choice(weights.size, size=cfg.n_points, p=weights / weights.sum())
    shocks = rng.standard_normal(cfg.n_points)

    means = np.column_stack([comp.mean.evaluate(x) for comp in cfg.component_specs])
    stds = np.column_stack([comp.noise.std(x) for comp in cfg.component_specs])
    rows = np.arange(cfg.n_points)
    y = means[rows, labels] + stds[rows, labels] * shocks

    logger.info(
        "Generated %d points, component counts %s",
        cfg.n_points,
        np.bincount(labels, minlength=weights.size).tolist(),
    )
    return Dataset(x=x, y=y, norm_stats=cfg.norm_stats, labels=labels)
