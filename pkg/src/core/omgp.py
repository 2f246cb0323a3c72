"""Overlapping mixture of Gaussian processes trained by variational EM.

Each observation belongs to one of K latent functions. The mean-field
posterior alternates between responsibilities q(Z) and per-component GP
posteriors q(f_k); hyperparameters are fitted on the marginalised
(corrected) lower bound with the responsibilities held fixed.
"""

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp, rel_entr
from scipy.stats import norm
from sklearn.cluster import KMeans

from ..data.models import Dataset, NormStats
from ..utils.config import OmgpConfig, OptimizerConfig
from ..utils.errors import InsufficientData, InvalidHyperparameter
from .functions import (
    ConstantKernel,
    ConstantMean,
    KernelSpec,
    MeanSpec,
    SquaredExponentialKernel,
    kernel_from_dict,
    mean_from_dict,
)
from .gp import (
    NOISE_BOUNDS,
    NOISE_PLAUSIBLE,
    VARIANCE_FLOOR,
    GpPrior,
    PredictiveDistribution,
    default_prior,
)
from .hetgp import NoiseProcess, fit_hetgp, predict_noise
from .numerics import (
    SpdFactorization,
    cholesky_factor,
    normalize_log_rows,
    solve_lower,
    solve_spd,
)
from .optimizer import central_differences, minimize_with_restarts

logger = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))
SIMPLEX_TOLERANCE = 1e-9
RESPONSIBILITY_FLOOR = 1e-12
EM_RESTART_STRIDE = 1000  # seed offset between whole EM runs
PLATEAU_QUANTILE = 0.8


@dataclass(frozen=True)
class ComponentPrior:
    """Mean function and kernel of one latent function."""

    mean: MeanSpec
    kernel: KernelSpec

    def to_dict(self) -> dict:
        return {"mean": self.mean.to_dict(), "kernel": self.kernel.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "ComponentPrior":
        return cls(mean=mean_from_dict(data["mean"]), kernel=kernel_from_dict(data["kernel"]))


@dataclass(frozen=True)
class OmgpPrior:
    """
    Priors of all K components plus the shared noise level.

    ``train_prior_pi`` (N x K) and ``query_prior_pi`` (K) default to uniform
    when left as None.
    """

    component_priors: tuple[ComponentPrior, ...]
    shared_noise_std: float
    train_prior_pi: Optional[np.ndarray] = None
    query_prior_pi: Optional[np.ndarray] = None

    def __post_init__(self):
        if len(self.component_priors) < 1:
            raise InvalidHyperparameter("an OMGP needs at least one component")
        if not self.shared_noise_std > 0:
            raise InvalidHyperparameter(
                f"shared_noise_std must be > 0, got {self.shared_noise_std}"
            )
        object.__setattr__(self, "component_priors", tuple(self.component_priors))
        k = self.k_components
        if self.train_prior_pi is not None:
            pi = np.asarray(self.train_prior_pi, dtype=float)
            if pi.ndim != 2 or pi.shape[1] != k:
                raise InvalidHyperparameter(f"train_prior_pi must have {k} columns")
            if np.any(pi < 0) or np.any(np.abs(pi.sum(axis=1) - 1.0) > 1e-12):
                raise InvalidHyperparameter("train_prior_pi rows must be probability vectors")
            object.__setattr__(self, "train_prior_pi", pi)
        if self.query_prior_pi is not None:
            q = np.asarray(self.query_prior_pi, dtype=float).ravel()
            if q.size != k or np.any(q < 0) or abs(q.sum() - 1.0) > SIMPLEX_TOLERANCE:
                raise InvalidHyperparameter(f"query_prior_pi must be a simplex over {k} entries")
            object.__setattr__(self, "query_prior_pi", q)

    @property
    def k_components(self) -> int:
        return len(self.component_priors)

    @property
    def shared_noise_var(self) -> float:
        return self.shared_noise_std**2

    def train_pi(self, n: int) -> np.ndarray:
        if self.train_prior_pi is None:
            return np.full((n, self.k_components), 1.0 / self.k_components)
        if self.train_prior_pi.shape[0] != n:
            raise InvalidHyperparameter(
                f"train_prior_pi has {self.train_prior_pi.shape[0]} rows, data has {n}"
            )
        return self.train_prior_pi

    def query_pi(self) -> np.ndarray:
        if self.query_prior_pi is None:
            return np.full(self.k_components, 1.0 / self.k_components)
        return self.query_prior_pi

    def component_gp(self, k: int) -> GpPrior:
        c = self.component_priors[k]
        return GpPrior(mean=c.mean, kernel=c.kernel, noise_std=self.shared_noise_std)

    # Optimizer vector: every component's mean then kernel, then log sigma

    def to_vector(self) -> np.ndarray:
        parts = [
            np.concatenate([c.mean.to_vector(), c.kernel.to_vector()])
            for c in self.component_priors
        ]
        parts.append([np.log(max(self.shared_noise_std, NOISE_BOUNDS[0]))])
        return np.concatenate(parts)

    def with_vector(self, vector: np.ndarray) -> "OmgpPrior":
        vector = np.asarray(vector, dtype=float)
        components, offset = [], 0
        for c in self.component_priors:
            n_mean, n_kernel = c.mean.n_params, c.kernel.n_params
            mean = c.mean.with_vector(vector[offset : offset + n_mean])
            offset += n_mean
            kernel = c.kernel.with_vector(vector[offset : offset + n_kernel])
            offset += n_kernel
            components.append(ComponentPrior(mean=mean, kernel=kernel))
        if vector.size != offset + 1:
            raise InvalidHyperparameter(f"expected {offset + 1} values, got {vector.size}")
        return replace(
            self,
            component_priors=tuple(components),
            shared_noise_std=float(np.exp(vector[-1])),
        )

    def vector_bounds(self) -> list:
        bounds = []
        for c in self.component_priors:
            bounds += c.mean.vector_bounds() + c.kernel.vector_bounds()
        bounds.append((float(np.log(NOISE_BOUNDS[0])), float(np.log(NOISE_BOUNDS[1]))))
        return bounds

    def plausible_bounds(self) -> list:
        window = []
        for c in self.component_priors:
            window += c.mean.plausible_bounds() + c.kernel.plausible_bounds()
        window.append((float(np.log(NOISE_PLAUSIBLE[0])), float(np.log(NOISE_PLAUSIBLE[1]))))
        return window

    def to_dict(self) -> dict:
        return {
            "component_priors": [c.to_dict() for c in self.component_priors],
            "shared_noise_std": self.shared_noise_std,
            "train_prior_pi": (
                None if self.train_prior_pi is None else self.train_prior_pi.tolist()
            ),
            "query_prior_pi": (
                None if self.query_prior_pi is None else self.query_prior_pi.tolist()
            ),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "OmgpPrior":
        return cls(
            component_priors=tuple(ComponentPrior.from_dict(c) for c in data["component_priors"]),
            shared_noise_std=float(data["shared_noise_std"]),
            train_prior_pi=data.get("train_prior_pi"),
            query_prior_pi=data.get("query_prior_pi"),
        )


@dataclass(frozen=True)
class Responsibilities:
    """Variational posterior q(Z) as an N x K row-stochastic matrix."""

    pi_hat: np.ndarray

    def __post_init__(self):
        pi_hat = np.asarray(self.pi_hat, dtype=float)
        if pi_hat.ndim != 2:
            raise InvalidHyperparameter("responsibilities must be an N x K matrix")
        if pi_hat.size and (
            np.any(pi_hat < 0)
            or np.any(pi_hat > 1.0 + SIMPLEX_TOLERANCE)
            or np.any(np.abs(pi_hat.sum(axis=1) - 1.0) > SIMPLEX_TOLERANCE)
        ):
            raise InvalidHyperparameter("responsibility rows must be probability vectors")
        object.__setattr__(self, "pi_hat", pi_hat)


@dataclass(frozen=True)
class ComponentPosterior:
    """
    Gaussian posterior q(f_k) at the training inputs.

    ``chol`` factorizes I + B^1/2 K B^1/2 and ``sqrt_b`` holds B^1/2; both
    are reused for prediction.
    """

    post_mean: np.ndarray
    post_cov: np.ndarray
    b_diag: np.ndarray
    chol: SpdFactorization
    sqrt_b: np.ndarray


@dataclass(frozen=True)
class OmgpModel:
    """Variational state of a fitted (or fitting) OMGP."""

    prior: OmgpPrior
    responsibilities: Responsibilities
    components: tuple[ComponentPosterior, ...]
    train_x: np.ndarray
    train_y: np.ndarray
    bound_trace: list = field(default_factory=list)
    noise_processes: Optional[tuple[Optional[NoiseProcess], ...]] = None  # None entry: shared sigma
    norm_stats: NormStats = field(default_factory=NormStats)
    responsibility_floor: float = RESPONSIBILITY_FLOOR

    def __post_init__(self):
        if (
            self.noise_processes is not None
            and len(self.noise_processes) != self.prior.k_components
        ):
            raise InvalidHyperparameter("need one noise process slot per component")
        if not 0 < self.responsibility_floor < 1:
            raise InvalidHyperparameter(
                f"responsibility_floor must lie in (0, 1), got {self.responsibility_floor}"
            )

    @property
    def k_components(self) -> int:
        return self.prior.k_components

    @property
    def is_heteroscedastic(self) -> bool:
        return self.noise_processes is not None

    @cached_property
    def train_noise(self) -> np.ndarray:
        """N x K matrix of noise variances at the training inputs."""
        return _noise_matrix(self.prior, self.noise_processes, self.train_x)

    def noise_variances(self, x) -> np.ndarray:
        """M x K matrix of per-component noise variances at ``x``."""
        return _noise_matrix(self.prior, self.noise_processes, x)

    @property
    def bound(self) -> float:
        return self.bound_trace[-1] if self.bound_trace else corrected_lower_bound(self)


# ---------------------------------------------------------------------------
# Internal algebra
# ---------------------------------------------------------------------------


def _noise_matrix(
    prior: OmgpPrior,
    noise_processes: Optional[Sequence[Optional[NoiseProcess]]],
    x,
) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    noise = np.full((x.size, prior.k_components), prior.shared_noise_var)
    if noise_processes is not None:
        for k, process in enumerate(noise_processes):
            if process is not None:
                noise[:, k] = predict_noise(process, x)
    return noise


def _het_columns(model: OmgpModel) -> np.ndarray:
    """Training noise with NaN where a component uses the shared sigma."""
    noise = np.full((model.train_x.size, model.k_components), np.nan)
    if model.noise_processes is not None:
        for k, process in enumerate(model.noise_processes):
            if process is not None:
                noise[:, k] = model.train_noise[:, k]
    return noise


def _fill_shared(het_noise: np.ndarray, prior: OmgpPrior) -> np.ndarray:
    return np.where(np.isnan(het_noise), prior.shared_noise_var, het_noise)


def _symmetrized(K: np.ndarray, pi_col: np.ndarray, noise_col: np.ndarray, floor: float):
    """Factorize I + B^1/2 K B^1/2 with B = diag(pi / noise), pi floored."""
    b = np.maximum(pi_col, floor) / noise_col
    sqrt_b = np.sqrt(b)
    A = sqrt_b[:, None] * K * sqrt_b[None, :]
    A[np.diag_indices_from(A)] += 1.0
    return b, sqrt_b, cholesky_factor(A)


def _bound(
    prior: OmgpPrior,
    x: np.ndarray,
    y: np.ndarray,
    pi_hat: np.ndarray,
    noise: np.ndarray,
    floor: float = RESPONSIBILITY_FLOOR,
) -> float:
    n = x.size
    if n == 0:
        return 0.0
    value = 0.0
    for k, c in enumerate(prior.component_priors):
        K = c.kernel.gram(x, x)
        _, sqrt_b, fact = _symmetrized(K, pi_hat[:, k], noise[:, k], floor)
        z = solve_lower(fact, sqrt_b * (y - c.mean.evaluate(x)))
        value += -0.5 * float(z @ z) - float(np.sum(np.log(np.diag(fact.lower_factor))))

    kl = float(np.sum(rel_entr(pi_hat, prior.train_pi(n))))
    data_fit = 0.5 * float(np.sum(pi_hat * (LOG_2PI + np.log(noise))))
    return value - kl - data_fit


def _bound_gradient(
    prior: OmgpPrior,
    x: np.ndarray,
    y: np.ndarray,
    pi_hat: np.ndarray,
    het_noise: np.ndarray,
    floor: float,
    fd_step: float,
) -> tuple[float, np.ndarray]:
    """
    Corrected bound and its gradient with respect to ``prior.to_vector()``.

    Per component the bound is a GP log marginal likelihood with noise
    B^-1, so dL/dθ = tr(W dK/dθ) + α'dm/dθ with α = (K + B^-1)^-1 (y - m)
    and W = (αα' - (K + B^-1)^-1) / 2. One factorization per component
    serves the value and every partial; only dm/dθ and dK/dθ come from
    central differences, which cost no factorization.
    """
    n = x.size
    vector = prior.to_vector()
    grad = np.zeros(vector.size)
    if n == 0:
        return 0.0, grad
    noise = _fill_shared(het_noise, prior)
    value, offset = 0.0, 0
    for k, c in enumerate(prior.component_priors):
        n_mean, n_kernel = c.mean.n_params, c.kernel.n_params
        K = c.kernel.gram(x, x)
        m = c.mean.evaluate(x)
        _, sqrt_b, fact = _symmetrized(K, pi_hat[:, k], noise[:, k], floor)
        scaled = sqrt_b * (y - m)
        z = solve_lower(fact, scaled)
        value += -0.5 * float(z @ z) - float(np.sum(np.log(np.diag(fact.lower_factor))))

        u = solve_spd(fact, scaled)
        alpha = sqrt_b * u
        a_inv = solve_spd(fact, np.eye(n))
        w = 0.5 * (np.outer(alpha, alpha) - sqrt_b[:, None] * a_inv * sqrt_b[None, :])

        for i, dm in central_differences(
            lambda v: c.mean.with_vector(v).evaluate(x), c.mean.to_vector(), fd_step
        ):
            grad[offset + i] = float(alpha @ dm)
        offset += n_mean
        for i, dK in central_differences(
            lambda v: c.kernel.with_vector(v).gram(x, x), c.kernel.to_vector(), fd_step
        ):
            grad[offset + i] = float(np.sum(w * dK))
        offset += n_kernel

        if np.isnan(het_noise[0, k]):
            # B^-1 = sigma^2 / pi; the diagonal of W / b is formed as (u^2 - A^-1) / 2
            # so floored responsibilities never divide by ~0
            w_over_b = 0.5 * (u**2 - np.diag(a_inv))
            grad[-1] += 2.0 * float(np.sum(w_over_b)) + n - float(np.sum(pi_hat[:, k]))

    kl = float(np.sum(rel_entr(pi_hat, prior.train_pi(n))))
    data_fit = 0.5 * float(np.sum(pi_hat * (LOG_2PI + np.log(noise))))
    return value - kl - data_fit, grad


class _NegativeBound:
    """
    Negated corrected bound for the M-step, with its gradient.

    scipy asks for the value and then the gradient at the same point, so
    the last evaluation is cached and both come from one pass.
    """

    def __init__(self, base, x, y, pi_hat, het_noise, floor, fd_step):
        self.base = base
        self.args = (x, y, pi_hat, het_noise, floor, fd_step)
        self._key: Optional[bytes] = None
        self._value = 0.0
        self._grad = np.zeros(0)

    def _evaluate(self, vector: np.ndarray) -> None:
        vector = np.asarray(vector, dtype=float)
        key = vector.tobytes()
        if key == self._key:
            return
        value, grad = _bound_gradient(self.base.with_vector(vector), *self.args)
        self._key, self._value, self._grad = key, -value, -grad

    def value(self, vector: np.ndarray) -> float:
        self._evaluate(vector)
        return self._value

    def gradient(self, vector: np.ndarray) -> np.ndarray:
        self._evaluate(vector)
        return self._grad


def _posteriors(
    prior: OmgpPrior,
    x: np.ndarray,
    y: np.ndarray,
    pi_hat: np.ndarray,
    noise: np.ndarray,
    floor: float = RESPONSIBILITY_FLOOR,
) -> tuple[ComponentPosterior, ...]:
    posteriors = []
    for k, c in enumerate(prior.component_priors):
        K = c.kernel.gram(x, x)
        m = c.mean.evaluate(x)
        b, sqrt_b, fact = _symmetrized(K, pi_hat[:, k], noise[:, k], floor)
        v = solve_lower(fact, sqrt_b[:, None] * K)
        cov = K - v.T @ v
        cov = 0.5 * (cov + cov.T)
        mean = m + K @ (sqrt_b * solve_spd(fact, sqrt_b * (y - m)))
        posteriors.append(
            ComponentPosterior(post_mean=mean, post_cov=cov, b_diag=b, chol=fact, sqrt_b=sqrt_b)
        )
    return tuple(posteriors)


def _relative_change(new: float, old: float) -> float:
    return abs(new - old) / max(abs(old), 1.0)


# ---------------------------------------------------------------------------
# Variational updates
# ---------------------------------------------------------------------------


def initial_state(
    data: Dataset,
    prior: OmgpPrior,
    pi_hat: Optional[np.ndarray] = None,
    noise_processes: Optional[Sequence[Optional[NoiseProcess]]] = None,
    responsibility_floor: float = RESPONSIBILITY_FLOOR,
) -> OmgpModel:
    """Build a state from responsibilities (uniform by default) and the prior."""
    n, k = len(data), prior.k_components
    if pi_hat is None:
        pi_hat = np.full((n, k), 1.0 / k)
    resp = Responsibilities(pi_hat)
    noise = _noise_matrix(prior, noise_processes, data.x)
    return OmgpModel(
        prior=prior,
        responsibilities=resp,
        components=_posteriors(
            prior, data.x, data.y, resp.pi_hat, noise, responsibility_floor
        ),
        train_x=data.x,
        train_y=data.y,
        noise_processes=None if noise_processes is None else tuple(noise_processes),
        norm_stats=data.norm_stats,
        responsibility_floor=responsibility_floor,
    )


def perturbed_uniform(
    n: int,
    k: int,
    magnitude: float,
    rng: np.random.Generator,
    floor: float = RESPONSIBILITY_FLOOR,
) -> np.ndarray:
    """Uniform rows plus symmetric uniform noise, clipped and renormalized."""
    rows = 1.0 / k + rng.uniform(-magnitude, magnitude, size=(n, k))
    rows = np.maximum(rows, floor)
    return rows / rows.sum(axis=1, keepdims=True)


def _log_weights(y, mu, var, noise) -> np.ndarray:
    return -0.5 * ((y[:, None] - mu) ** 2 + var) / noise - 0.5 * (LOG_2PI + np.log(noise))


def prior_responsibilities(
    data: Dataset,
    prior: OmgpPrior,
    pi_hat: np.ndarray,
    floor: float = RESPONSIBILITY_FLOOR,
) -> np.ndarray:
    """
    One q(Z) update with every q(f_k) still at its prior.

    ``pi_hat`` (typically perturbed-uniform rows) weights the update, so
    the start is seeded yet already sorted by the component mean functions.
    Rows are floored and renormalized.
    """
    x, y = data.x, data.y
    noise = _noise_matrix(prior, None, x)
    mu = np.column_stack([c.mean.evaluate(x) for c in prior.component_priors])
    var = np.column_stack([c.kernel.diag(x) for c in prior.component_priors])
    rows = normalize_log_rows(np.log(pi_hat) + _log_weights(y, mu, var, noise))
    rows = np.maximum(rows, floor)
    return rows / rows.sum(axis=1, keepdims=True)


def update_responsibilities(state: OmgpModel) -> Responsibilities:
    """
    Mean-field update of q(Z) from the current component posteriors.

    Π̂[i,k] ∝ Π[i,k] exp(a_ik) with
    a_ik = -((y_i - μ_ik)^2 + Σ_k[i,i]) / (2σ_ik^2) - log(2πσ_ik^2) / 2.
    """
    y = state.train_y
    mu = np.column_stack([c.post_mean for c in state.components])
    var = np.column_stack([np.diag(c.post_cov) for c in state.components])
    a = _log_weights(y, mu, var, state.train_noise)
    with np.errstate(divide="ignore"):
        log_prior = np.log(state.prior.train_pi(y.size))
    pi_hat = normalize_log_rows(log_prior + a)
    return Responsibilities(pi_hat / pi_hat.sum(axis=1, keepdims=True))


def update_component_posteriors(
    state: OmgpModel, resp: Responsibilities
) -> tuple[ComponentPosterior, ...]:
    """
    Mean-field update of every q(f_k) given responsibilities.

    Uses Σ = K - K B^1/2 (I + B^1/2 K B^1/2)^-1 B^1/2 K so that K is never
    inverted and zero responsibilities are harmless.
    """
    return _posteriors(
        state.prior,
        state.train_x,
        state.train_y,
        resp.pi_hat,
        state.train_noise,
        state.responsibility_floor,
    )


def corrected_lower_bound(state: OmgpModel) -> float:
    """
    Marginalised variational bound at the current responsibilities.

    Sum over components of -||L_k^-1 B_k^1/2 (y - m_k)||^2 / 2 - sum log diag L_k,
    minus KL(q(Z) || p(Z)), minus the expected noise normalizers.
    """
    return _bound(
        state.prior,
        state.train_x,
        state.train_y,
        state.responsibilities.pi_hat,
        state.train_noise,
        state.responsibility_floor,
    )


def e_step(state: OmgpModel, config: Optional[OmgpConfig] = None) -> OmgpModel:
    """
    Alternate responsibility and posterior updates until the bound settles.

    Posteriors are first refreshed for the incoming responsibilities so the
    bound cannot decrease across inner iterations.
    """
    config = config or OmgpConfig()
    state = replace(
        state,
        components=update_component_posteriors(state, state.responsibilities),
    )
    trace = list(state.bound_trace)
    previous = corrected_lower_bound(state)

    for iteration in range(1, config.max_inner + 1):
        resp = update_responsibilities(state)
        state = replace(state, responsibilities=resp)
        state = replace(state, components=update_component_posteriors(state, resp))
        bound = corrected_lower_bound(state)
        trace.append(bound)
        logger.debug("E-step iteration %d: bound %.6f", iteration, bound)
        if _relative_change(bound, previous) < config.inner_tolerance:
            break
        previous = bound

    return replace(state, bound_trace=trace)


def m_step(state: OmgpModel, opt: Optional[OptimizerConfig] = None, seed: int = 0) -> OmgpModel:
    """
    Maximise the corrected bound over all component hyperparameters and the
    shared noise, with q(Z) frozen.
    """
    opt = opt or OptimizerConfig(restarts=1, max_iter=50)
    base = state.prior
    objective = _NegativeBound(
        base,
        state.train_x,
        state.train_y,
        state.responsibilities.pi_hat,
        _het_columns(state),
        state.responsibility_floor,
        opt.fd_step,
    )

    result = minimize_with_restarts(
        objective.value,
        base.to_vector(),
        base.vector_bounds(),
        base.plausible_bounds(),
        opt,
        rng=np.random.default_rng(seed),
        gradient=objective.gradient,
    )
    prior = base.with_vector(result.x)
    updated = replace(state, prior=prior)
    updated = replace(
        updated,
        components=update_component_posteriors(updated, state.responsibilities),
    )
    bound = corrected_lower_bound(updated)
    logger.debug("M-step: bound %.6f -> %.6f", -result.initial_fun, bound)
    return replace(updated, bound_trace=list(state.bound_trace) + [bound])


def _run_em(data: Dataset, prior: OmgpPrior, config: OmgpConfig, seed: int) -> OmgpModel:
    k = prior.k_components
    rng = np.random.default_rng(seed)
    floor = config.responsibility_floor
    pi_hat = perturbed_uniform(len(data), k, config.init_perturbation, rng, floor)
    pi_hat = prior_responsibilities(data, prior, pi_hat, floor)
    state = initial_state(data, prior, pi_hat, responsibility_floor=floor)

    previous = None
    for round_ in range(1, config.max_em + 1):
        state = e_step(state, config)
        state = m_step(state, config.m_step, seed=seed + round_)
        bound = state.bound_trace[-1]
        logger.info("EM round %d: bound %.4f", round_, bound)
        if previous is not None and _relative_change(bound, previous) < config.em_tolerance:
            break
        previous = bound

    return e_step(state, config)


def fit_omgp(
    data: Dataset,
    prior: OmgpPrior,
    config: Optional[OmgpConfig] = None,
    seed: int = 0,
) -> OmgpModel:
    """
    Fit an OMGP by alternating E-steps and M-steps.

    Responsibilities start from seeded perturbed-uniform rows, updated once
    against the component priors. With ``config.em_restarts`` > 1 the whole
    EM run is repeated from fresh seeds and the run with the highest final
    bound is kept.

    Args:
        data: Training observations (at least 5 per component)
        prior: Initial component priors and shared noise
        config: EM settings
        seed: Seed for responsibility initialization and optimizer restarts

    Returns:
        Fitted OmgpModel with the full bound trace

    Raises:
        InsufficientData: fewer than 5K observations
        OptimizationFailed: propagated from the M-step
    """
    config = config or OmgpConfig()
    k = prior.k_components
    if len(data) < 5 * k:
        raise InsufficientData(f"{k} components need at least {5 * k} points, got {len(data)}")

    best: Optional[OmgpModel] = None
    for restart in range(config.em_restarts):
        state = _run_em(data, prior, config, seed + EM_RESTART_STRIDE * restart)
        logger.info("EM restart %d: final bound %.4f", restart, state.bound)
        if best is None or state.bound > best.bound:
            best = state
    return best


# ---------------------------------------------------------------------------
# Prediction and classification
# ---------------------------------------------------------------------------


def omgp_predict(
    model: OmgpModel,
    query_x,
    include_noise: bool = True,
) -> tuple[list[PredictiveDistribution], np.ndarray]:
    """
    Per-component posterior predictive and the mixture weights.

    Args:
        model: Fitted OMGP
        query_x: Query inputs
        include_noise: Add each component's noise R* to its variance

    Returns:
        (one PredictiveDistribution per component, query prior weights)
    """
    query_x = np.atleast_1d(np.asarray(query_x, dtype=float)).ravel()
    x, y = model.train_x, model.train_y
    noise = model.noise_variances(query_x) if include_noise else None

    predictions = []
    for k, (c, post) in enumerate(zip(model.prior.component_priors, model.components)):
        cross = c.kernel.gram(x, query_x)
        residual = y - c.mean.evaluate(x)
        weights = post.sqrt_b * solve_spd(post.chol, post.sqrt_b * residual)
        mean = c.mean.evaluate(query_x) + cross.T @ weights
        v = solve_lower(post.chol, post.sqrt_b[:, None] * cross)
        variance = c.kernel.diag(query_x) - np.sum(v**2, axis=0)
        if noise is not None:
            variance = variance + noise[:, k]
        predictions.append(
            PredictiveDistribution(mean=mean, variance=np.maximum(variance, VARIANCE_FLOOR))
        )
    return predictions, model.prior.query_pi()


def component_log_densities(model: OmgpModel, x, y) -> np.ndarray:
    """M x K matrix of log N(y | μ*_k(x), Σ*_k(x)) with noise."""
    y = np.atleast_1d(np.asarray(y, dtype=float)).ravel()
    predictions, _ = omgp_predict(model, x)
    return np.column_stack([norm.logpdf(y, p.mean, p.std) for p in predictions])


def classify_posteriors(model: OmgpModel, x, y) -> np.ndarray:
    """M x K component posteriors for a batch of observations."""
    with np.errstate(divide="ignore"):
        log_weights = np.log(model.prior.query_pi())
    return normalize_log_rows(log_weights + component_log_densities(model, x, y))


def classify_posterior(model: OmgpModel, x_star: float, y_star: float) -> tuple[np.ndarray, int]:
    """Bayes-rule component posterior for one observation and its MAP index."""
    posterior = classify_posteriors(model, [x_star], [y_star])[0]
    return posterior, int(np.argmax(posterior))


def classify_train(model: OmgpModel) -> np.ndarray:
    """MAP component per training point; ties go to the lowest index."""
    return np.argmax(model.responsibilities.pi_hat, axis=1)


def mixture_log_density(model: OmgpModel, x, y) -> np.ndarray:
    """Log density of each observation under the query-weighted mixture."""
    with np.errstate(divide="ignore"):
        log_weights = np.log(model.prior.query_pi())
    return logsumexp(log_weights + component_log_densities(model, x, y), axis=1)


# ---------------------------------------------------------------------------
# Heteroscedastic refinement and defaults
# ---------------------------------------------------------------------------


def heteroscedastic_update(
    model: OmgpModel,
    config: Optional[OmgpConfig] = None,
    seed: int = 0,
) -> OmgpModel:
    """
    Give every component its own input-dependent noise.

    Training points are grouped by MAP label; a noise process is fitted on
    each group and evaluated at all N inputs, then the E-step is rerun.
    Components with fewer than ``het_min_points`` points (or fewer than the
    het-GP fit itself needs) keep the shared noise level.
    """
    config = config or OmgpConfig()
    labels = classify_train(model)
    data = Dataset(x=model.train_x, y=model.train_y, norm_stats=model.norm_stats)
    min_points = max(config.het_min_points, config.het.min_points)

    processes: list[Optional[NoiseProcess]] = []
    for k in range(model.k_components):
        members = np.flatnonzero(labels == k)
        if members.size < min_points:
            logger.warning(
                "component %d has %d MAP points (< %d); keeping the shared noise level",
                k,
                members.size,
                min_points,
            )
            processes.append(None)
            continue
        het = fit_hetgp(
            data.subset(members), model.prior.component_gp(k), config.het, seed=seed + k
        )
        processes.append(het.noise_process)
        logger.info("component %d: noise process fitted on %d points", k, members.size)

    updated = replace(model, noise_processes=tuple(processes))
    return e_step(updated, config)


def plateau_levels(data: Dataset, k: int, seed: int = 0) -> np.ndarray:
    """
    K output levels seen at high inputs, in descending order.

    Outputs whose input lies above the ``PLATEAU_QUANTILE`` of x are
    clustered with k-means. Too few distinct values fall back to levels
    spread evenly from max(y) down to min(y).
    """
    if len(data) == 0:
        return np.linspace(1.0, 0.0, k)
    high = data.y[data.x >= np.quantile(data.x, PLATEAU_QUANTILE)]
    if np.unique(high).size < k:
        return np.linspace(float(np.max(data.y)), float(np.min(data.y)), k)
    kmeans = KMeans(n_clusters=k, n_init=10, random_state=seed).fit(high.reshape(-1, 1))
    return np.sort(kmeans.cluster_centers_.ravel())[::-1]


def default_omgp_prior(data: Dataset, k: int) -> OmgpPrior:
    """
    Starting prior for K components.

    K - 1 soft-clip components with SE kernels whose plateaus take the
    upper K - 1 of ``plateau_levels``, plus one near-constant component at
    the lowest level. A single component is a plain soft-clip.
    """
    if k < 1:
        raise InvalidHyperparameter(f"k must be >= 1, got {k}")
    base = default_prior(data, "soft_clip")
    kernel = base.kernel
    if k == 1:
        return OmgpPrior(
            component_priors=(ComponentPrior(base.mean, kernel),),
            shared_noise_std=base.noise_std,
        )

    smooth = SquaredExponentialKernel(
        process_std=0.2 * kernel.process_std,
        length_scale=2.0 * kernel.length_scale,
    )
    levels = plateau_levels(data, k)
    components = [
        ComponentPrior(replace(base.mean, alpha1=float(level)), smooth) for level in levels[:-1]
    ]
    components.append(
        ComponentPrior(ConstantMean(level=float(levels[-1])), ConstantKernel(level=1e-2))
    )
    return OmgpPrior(component_priors=tuple(components), shared_noise_std=base.noise_std)
