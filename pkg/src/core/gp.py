"""Homoscedastic Gaussian-process regression."""

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.stats import norm

from ..data.models import Dataset
from ..utils.config import OptimizerConfig
from ..utils.errors import EmptyInput, InsufficientData, InvalidHyperparameter
from .functions import (
    ConstantMean,
    KernelSpec,
    MeanSpec,
    SoftClipMean,
    SquaredExponentialKernel,
    ZeroMean,
    kernel_from_dict,
    mean_from_dict,
)
from .numerics import SpdFactorization, cholesky_factor, log_det, solve_lower, solve_spd
from .optimizer import minimize_with_restarts

logger = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))
NOISE_BOUNDS = (1e-4, 1e1)
NOISE_PLAUSIBLE = (1e-3, 1.0)
VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class GpPrior:
    """Mean function, kernel and observation noise of a GP."""

    mean: MeanSpec
    kernel: KernelSpec
    noise_std: float

    def __post_init__(self):
        if not self.noise_std > 0:
            raise InvalidHyperparameter(f"noise_std must be > 0, got {self.noise_std}")

    @property
    def noise_var(self) -> float:
        return self.noise_std**2

    def to_vector(self, include_noise: bool = True) -> np.ndarray:
        parts = [self.mean.to_vector(), self.kernel.to_vector()]
        if include_noise:
            parts.append([np.log(max(self.noise_std, NOISE_BOUNDS[0]))])
        return np.concatenate(parts)

    def with_vector(self, vector: np.ndarray, include_noise: bool = True) -> "GpPrior":
        vector = np.asarray(vector, dtype=float)
        n_mean, n_kernel = self.mean.n_params, self.kernel.n_params
        expected = n_mean + n_kernel + int(include_noise)
        if vector.size != expected:
            raise InvalidHyperparameter(f"expected {expected} values, got {vector.size}")
        mean = self.mean.with_vector(vector[:n_mean])
        kernel = self.kernel.with_vector(vector[n_mean : n_mean + n_kernel])
        noise_std = float(np.exp(vector[-1])) if include_noise else self.noise_std
        return GpPrior(mean=mean, kernel=kernel, noise_std=noise_std)

    def vector_bounds(self, include_noise: bool = True) -> list:
        bounds = self.mean.vector_bounds() + self.kernel.vector_bounds()
        if include_noise:
            bounds.append((float(np.log(NOISE_BOUNDS[0])), float(np.log(NOISE_BOUNDS[1]))))
        return bounds

    def plausible_bounds(self, include_noise: bool = True) -> list:
        window = self.mean.plausible_bounds() + self.kernel.plausible_bounds()
        if include_noise:
            window.append((float(np.log(NOISE_PLAUSIBLE[0])), float(np.log(NOISE_PLAUSIBLE[1]))))
        return window

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.to_dict(),
            "kernel": self.kernel.to_dict(),
            "noise_std": self.noise_std,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GpPrior":
        return cls(
            mean=mean_from_dict(data["mean"]),
            kernel=kernel_from_dict(data["kernel"]),
            noise_std=float(data["noise_std"]),
        )


@dataclass(frozen=True)
class PredictiveDistribution:
    """Predictive mean and marginal variance at a set of query inputs."""

    mean: np.ndarray
    variance: np.ndarray
    covariance: Optional[np.ndarray] = None

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.variance)


@dataclass(frozen=True)
class GpModel:
    """
    A GP conditioned on training data.

    ``noise_var`` holds a per-point noise variance when the model was built
    with a diagonal noise kernel; otherwise the prior's ``noise_std`` applies.
    """

    prior: GpPrior
    train_x: np.ndarray
    train_y: np.ndarray
    chol: SpdFactorization
    weights: np.ndarray
    noise_var: Optional[np.ndarray] = None
    nlml: float = float("nan")
    trace: list = field(default_factory=list)

    @property
    def n_train(self) -> int:
        return int(self.train_x.size)

    def predict(
        self,
        query_x,
        include_noise: bool = False,
        query_noise_var=None,
        full_cov: bool = False,
    ) -> PredictiveDistribution:
        return gp_predict(self, query_x, include_noise, query_noise_var, full_cov)


def _noise_diagonal(prior: GpPrior, n: int, noise_var=None) -> np.ndarray:
    if noise_var is None:
        return np.full(n, prior.noise_var)
    noise_var = np.asarray(noise_var, dtype=float).ravel()
    if noise_var.size != n:
        raise InvalidHyperparameter(f"noise_var has {noise_var.size} entries, expected {n}")
    return noise_var


def _factorize(prior: GpPrior, x: np.ndarray, noise_var=None) -> SpdFactorization:
    K = prior.kernel.gram(x, x)
    K[np.diag_indices_from(K)] += _noise_diagonal(prior, x.size, noise_var)
    return cholesky_factor(K)


def _nlml(prior: GpPrior, x: np.ndarray, y: np.ndarray, noise_var=None) -> float:
    if x.size == 0:
        raise EmptyInput("marginal likelihood needs at least one observation")
    residual = y - prior.mean.evaluate(x)
    fact = _factorize(prior, x, noise_var)
    alpha = solve_spd(fact, residual)
    return float(0.5 * residual @ alpha + 0.5 * log_det(fact) + 0.5 * x.size * LOG_2PI)


def nlml(prior: GpPrior, data: Dataset, noise_var=None) -> float:
    """
    Negative log marginal likelihood of ``data`` under ``prior``.

    Args:
        prior: Mean, kernel and noise level
        data: Training observations
        noise_var: Optional per-point noise variances replacing noise_std^2

    Returns:
        0.5 r^T (K + R)^-1 r + 0.5 log|K + R| + (N/2) log 2pi with r = y - m(x)
    """
    return _nlml(prior, data.x, data.y, noise_var)


def build_gp_model(prior: GpPrior, x, y, noise_var=None) -> GpModel:
    """Condition ``prior`` on (x, y) without touching its hyperparameters."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise InvalidHyperparameter(f"x and y lengths differ: {x.size} vs {y.size}")
    noise = None if noise_var is None else _noise_diagonal(prior, x.size, noise_var)
    fact = _factorize(prior, x, noise)
    residual = y - prior.mean.evaluate(x)
    weights = solve_spd(fact, residual)
    value = float("nan")
    if x.size:
        value = float(0.5 * residual @ weights + 0.5 * log_det(fact) + 0.5 * x.size * LOG_2PI)
    return GpModel(
        prior=prior,
        train_x=x,
        train_y=y,
        chol=fact,
        weights=weights,
        noise_var=noise,
        nlml=value,
    )


def default_prior(data: Dataset, mean_kind: str = "soft_clip") -> GpPrior:
    """
    Starting hyperparameters that place the prior over the data.

    Process std is std(y), length scale a tenth of the input span, noise a
    tenth of std(y). A soft-clip mean starts with alpha1 = max(y) and its
    transition centred on the median input.
    """
    x, y = data.x, data.y
    spread = max(float(np.std(y)), 1e-3) if y.size else 1.0
    span = float(np.ptp(x)) if x.size else 1.0
    span = span if span > 0 else 1.0

    mean: MeanSpec
    if mean_kind == "soft_clip":
        alpha2 = 4.0 / span
        median = float(np.median(x)) if x.size else 0.0
        top = float(np.max(y)) if y.size else 1.0
        mean = SoftClipMean(alpha1=top, alpha2=alpha2, alpha3=0.5 - alpha2 * median, beta=10.0)
    elif mean_kind == "constant":
        mean = ConstantMean(level=float(np.mean(y)) if y.size else 0.0)
    elif mean_kind == "zero":
        mean = ZeroMean()
    else:
        raise KeyError(f"unknown mean kind '{mean_kind}'")

    kernel = SquaredExponentialKernel(process_std=spread, length_scale=span / 10.0)
    return GpPrior(mean=mean, kernel=kernel, noise_std=0.1 * spread)


def fit_gp(
    data: Dataset,
    prior_init: GpPrior,
    opt: Optional[OptimizerConfig] = None,
    noise_var=None,
    seed: int = 0,
) -> GpModel:
    """
    Type-II maximum-likelihood fit of all GP hyperparameters.

    Args:
        data: Training observations (N >= 2)
        prior_init: Starting hyperparameters; restart 0 begins here
        opt: Optimizer settings
        noise_var: Fixed per-point noise variances; when given, noise_std
            is not optimized
        seed: Seed for the restart draws

    Returns:
        GpModel conditioned on the data under the optimized prior

    Raises:
        InsufficientData: fewer than two observations
        OptimizationFailed: no restart produced a factorizable covariance
    """
    if len(data) < 2:
        raise InsufficientData(f"fitting a GP needs at least 2 points, got {len(data)}")
    opt = opt or OptimizerConfig()
    fit_noise = noise_var is None
    x, y = data.x, data.y

    def objective(vector: np.ndarray) -> float:
        return _nlml(prior_init.with_vector(vector, fit_noise), x, y, noise_var)

    result = minimize_with_restarts(
        objective,
        prior_init.to_vector(fit_noise),
        prior_init.vector_bounds(fit_noise),
        prior_init.plausible_bounds(fit_noise),
        opt,
        rng=np.random.default_rng(seed),
    )
    prior = prior_init.with_vector(result.x, fit_noise)
    logger.info(
        "GP fit on %d points: nlml %.4f -> %.4f (%d/%d restarts failed)",
        len(data),
        result.initial_fun,
        result.fun,
        result.restarts_failed,
        result.restarts_run,
    )
    model = build_gp_model(prior, x, y, noise_var)
    return replace(model, trace=list(result.trace))


def gp_predict(
    model: GpModel,
    query_x,
    include_noise: bool = False,
    query_noise_var=None,
    full_cov: bool = False,
) -> PredictiveDistribution:
    """
    Posterior predictive of a conditioned GP.

    Args:
        model: Conditioned GP
        query_x: Query inputs
        include_noise: Add the observation noise R* to the variance
        query_noise_var: Per-query noise variances for R*; defaults to
            noise_std^2 of the prior
        full_cov: Also return the full predictive covariance

    Returns:
        PredictiveDistribution with variances floored at 1e-12
    """
    query_x = np.atleast_1d(np.asarray(query_x, dtype=float)).ravel()
    prior = model.prior
    cross = prior.kernel.gram(model.train_x, query_x)
    mean = prior.mean.evaluate(query_x) + cross.T @ model.weights
    v = solve_lower(model.chol, cross)
    variance = prior.kernel.diag(query_x) - np.sum(v**2, axis=0)

    noise = None
    if include_noise:
        noise = (
            np.full(query_x.size, prior.noise_var)
            if query_noise_var is None
            else np.broadcast_to(np.asarray(query_noise_var, dtype=float), query_x.shape)
        )
        variance = variance + noise

    covariance = None
    if full_cov:
        covariance = prior.kernel.gram(query_x, query_x) - v.T @ v
        if noise is not None:
            covariance[np.diag_indices_from(covariance)] += noise

    return PredictiveDistribution(
        mean=mean,
        variance=np.maximum(variance, VARIANCE_FLOOR),
        covariance=covariance,
    )


def joint_log_likelihood(model, data: Dataset) -> float:
    """
    Sum of per-point log predictive densities, noise included.

    Works for any model exposing ``predict(x, include_noise=True)``.
    """
    if len(data) == 0:
        return 0.0
    pred = model.predict(data.x, include_noise=True)
    return float(np.sum(norm.logpdf(data.y, loc=pred.mean, scale=pred.std)))
