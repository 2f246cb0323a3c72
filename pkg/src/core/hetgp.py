"""Most-likely heteroscedastic GP: a second GP models the log noise variance."""

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ..data.models import Dataset
from ..utils.config import HetGpConfig, OptimizerConfig
from ..utils.errors import InsufficientData, InvalidHyperparameter
from .functions import ConstantMean, SquaredExponentialKernel
from .gp import (
    GpModel,
    GpPrior,
    PredictiveDistribution,
    build_gp_model,
    fit_gp,
    joint_log_likelihood,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NoiseProcess:
    """Constant-mean SE-kernel GP over log noise variance g(x)."""

    model: GpModel

    @property
    def mean_level(self) -> float:
        return float(self.model.prior.mean.level)

    @property
    def kernel(self) -> SquaredExponentialKernel:
        return self.model.prior.kernel

    @property
    def train_x(self) -> np.ndarray:
        return self.model.train_x

    @property
    def train_g(self) -> np.ndarray:
        return self.model.train_y

    def to_dict(self) -> dict:
        return {
            "prior": self.model.prior.to_dict(),
            "train_x": self.train_x.tolist(),
            "train_g": self.train_g.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NoiseProcess":
        prior = GpPrior.from_dict(data["prior"])
        return cls(build_gp_model(prior, data["train_x"], data["train_g"]))


@dataclass(frozen=True)
class HetGpModel:
    """GP with diagonal noise kernel R = diag(r(x_i)) from a noise process."""

    f_model: GpModel
    noise_process: NoiseProcess
    history: list = field(default_factory=list)  # joint log-likelihood per outer iteration

    def __post_init__(self):
        if self.f_model.noise_var is None or np.any(self.f_model.noise_var <= 0):
            raise InvalidHyperparameter("heteroscedastic model needs positive per-point noise")

    @property
    def prior(self) -> GpPrior:
        return self.f_model.prior

    def predict(
        self,
        query_x,
        include_noise: bool = False,
        full_cov: bool = False,
    ) -> PredictiveDistribution:
        noise = predict_noise(self.noise_process, query_x) if include_noise else None
        return self.f_model.predict(query_x, include_noise, noise, full_cov)


def predict_noise(process: NoiseProcess, query_x) -> np.ndarray:
    """Noise variance r(x*) = exp(posterior mean of g at x*)."""
    return np.exp(process.model.predict(query_x).mean)


def constant_noise_process(x, log_variance: float) -> NoiseProcess:
    """Noise process whose prediction is exactly ``exp(log_variance)`` everywhere."""
    x = np.asarray(x, dtype=float).ravel()
    prior = GpPrior(
        mean=ConstantMean(level=float(log_variance)),
        kernel=SquaredExponentialKernel(process_std=1e-3, length_scale=1.0),
        noise_std=1e-2,
    )
    return NoiseProcess(build_gp_model(prior, x, np.full(x.size, float(log_variance))))


def empirical_log_noise(
    model,
    data: Dataset,
    s: int = 100,
    seed: int = 0,
    variance_floor: float = 1e-8,
) -> np.ndarray:
    """
    Most-likely log noise estimate at every training point.

    Draws ``s`` samples from the model's noisy predictive at each x_i and
    averages half the squared distance to y_i.

    Args:
        model: Anything exposing ``predict(x, include_noise=True)``
        data: Training observations
        s: Samples per point
        seed: Sampling seed
        variance_floor: Lower clamp on the variance before the log

    Returns:
        Vector g' of log-variance estimates, one per observation
    """
    if s < 1:
        raise ValueError("s must be >= 1")
    pred = model.predict(data.x, include_noise=True)
    rng = np.random.default_rng(seed)
    draws = rng.normal(
        loc=pred.mean[:, None],
        scale=np.sqrt(pred.variance)[:, None],
        size=(len(data), s),
    )
    spread = np.mean(0.5 * (data.y[:, None] - draws) ** 2, axis=1)
    return np.log(np.maximum(variance_floor, spread))


def fit_noise_process(
    x,
    g_prime,
    opt: Optional[OptimizerConfig] = None,
    seed: int = 0,
) -> NoiseProcess:
    """Type-II ML fit of a constant-mean SE GP on (x, g')."""
    x = np.asarray(x, dtype=float).ravel()
    g_prime = np.asarray(g_prime, dtype=float).ravel()
    if x.size != g_prime.size:
        raise InvalidHyperparameter(f"x and g' lengths differ: {x.size} vs {g_prime.size}")

    spread = max(float(np.std(g_prime)), 0.1)
    span = float(np.ptp(x)) if x.size else 1.0
    span = span if span > 0 else 1.0
    init = GpPrior(
        mean=ConstantMean(level=float(np.mean(g_prime))),
        kernel=SquaredExponentialKernel(process_std=spread, length_scale=span / 5.0),
        noise_std=spread,
    )
    opt = opt or OptimizerConfig(restarts=3, max_iter=100)
    return NoiseProcess(fit_gp(Dataset(x=x, y=g_prime), init, opt, seed=seed))


def _relative_change(new: float, old: float) -> float:
    return abs(new - old) / max(abs(old), 1.0)


def fit_hetgp(
    data: Dataset,
    prior_init: GpPrior,
    config: Optional[HetGpConfig] = None,
    seed: int = 0,
) -> HetGpModel:
    """
    Fit a most-likely heteroscedastic GP.

    Starts from a homoscedastic fit, then repeatedly estimates log noise
    from the current predictive, fits the noise process, and refits the
    mean/kernel hyperparameters under R = diag(r(x_i)). Stops when the
    joint log-likelihood changes by less than the tolerance (relative) or
    after ``max_outer`` rounds.

    Args:
        data: Training observations (N >= 10)
        prior_init: Starting hyperparameters for the homoscedastic fit
        config: Loop and optimizer settings
        seed: Seed for restarts and noise sampling

    Returns:
        The iterate with the best joint log-likelihood, carrying the full
        history of the loop

    Raises:
        InsufficientData: fewer than 10 observations
        OptimizationFailed: propagated from the GP fits
    """
    config = config or HetGpConfig()
    if len(data) < config.min_points:
        raise InsufficientData(
            f"heteroscedastic fit needs at least {config.min_points} points, got {len(data)}"
        )

    homoscedastic = fit_gp(data, prior_init, config.optimizer, seed=seed)
    noise0 = constant_noise_process(data.x, np.log(homoscedastic.prior.noise_var))
    f0 = build_gp_model(
        homoscedastic.prior,
        data.x,
        data.y,
        noise_var=predict_noise(noise0, data.x),
    )
    current = HetGpModel(f_model=f0, noise_process=noise0)
    current_ll = joint_log_likelihood(current, data)
    best, best_ll = current, current_ll
    history = [current_ll]
    logger.info("het-GP iteration 0 (homoscedastic): log-likelihood %.4f", current_ll)

    for iteration in range(1, config.max_outer + 1):
        g_prime = empirical_log_noise(
            current, data, config.samples, seed + iteration, config.variance_floor
        )
        noise = fit_noise_process(data.x, g_prime, config.noise_optimizer, seed=seed + iteration)
        r = predict_noise(noise, data.x)
        f_model = fit_gp(data, current.prior, config.optimizer, noise_var=r, seed=seed + iteration)
        current = HetGpModel(f_model=f_model, noise_process=noise)

        ll = joint_log_likelihood(current, data)
        history.append(ll)
        logger.info("het-GP iteration %d: log-likelihood %.4f", iteration, ll)
        if ll > best_ll:
            best, best_ll = current, ll
        if _relative_change(ll, current_ll) < config.tolerance:
            break
        current_ll = ll

    return replace(best, history=history)
