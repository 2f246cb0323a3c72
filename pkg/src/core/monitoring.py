"""Performance metrics, entropy-based novelty scoring and component-count selection."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np
from scipy.special import entr

from ..data.models import Dataset, EvaluationReport, NoveltyRecord
from ..utils.config import OmgpConfig
from ..utils.errors import DegenerateTargets, InvalidSimplex, WrongDimension
from .gp import GpModel, PredictiveDistribution
from .hetgp import HetGpModel
from .omgp import (
    OmgpModel,
    OmgpPrior,
    classify_posteriors,
    default_omgp_prior,
    fit_omgp,
    omgp_predict,
)

logger = logging.getLogger(__name__)

Model = Union[GpModel, HetGpModel, OmgpModel]

SIMPLEX_TOLERANCE = 1e-9
_TRIANGLE = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3.0) / 2.0]])


def model_kind(model: Model) -> str:
    """Short name used in model files and reports."""
    if isinstance(model, OmgpModel):
        return "omgp_het" if model.is_heteroscedastic else "omgp"
    if isinstance(model, HetGpModel):
        return "hetgp"
    return "gp"


def component_predictions(
    model: Model, x, include_noise: bool = True
) -> list[PredictiveDistribution]:
    """Per-component predictive distributions; a single GP gives a one-element list."""
    if isinstance(model, OmgpModel):
        predictions, _ = omgp_predict(model, x, include_noise)
        return predictions
    return [model.predict(x, include_noise=include_noise)]


def map_predictions(model: Model, x, y) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Predictive mean and noisy variance of each point's MAP component.

    Single GPs count as one component.

    Returns:
        (mean, variance, component index) per observation
    """
    x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    y = np.atleast_1d(np.asarray(y, dtype=float)).ravel()
    if isinstance(model, OmgpModel):
        predictions, _ = omgp_predict(model, x)
        labels = np.argmax(classify_posteriors(model, x, y), axis=1)
        means = np.column_stack([p.mean for p in predictions])
        variances = np.column_stack([p.variance for p in predictions])
        rows = np.arange(x.size)
        return means[rows, labels], variances[rows, labels], labels
    pred = model.predict(x, include_noise=True)
    return pred.mean, pred.variance, np.zeros(x.size, dtype=int)


def nmse_score(y, mean) -> float:
    """100 * mean squared error / population variance of the targets."""
    y = np.asarray(y, dtype=float).ravel()
    mean = np.asarray(mean, dtype=float).ravel()
    spread = float(np.var(y))
    if spread == 0:
        raise DegenerateTargets("test targets have zero variance")
    return float(100.0 * np.mean((mean - y) ** 2) / spread)


def msd_score(y, mean, variance) -> float:
    """Mean Mahalanobis squared distance of targets from marginal predictives."""
    y = np.asarray(y, dtype=float).ravel()
    return float(np.mean((np.asarray(mean) - y) ** 2 / np.asarray(variance)))


def nmse(model: Model, test: Dataset) -> float:
    """NMSE (percent) of each test point against its MAP component's mean."""
    mean, _, _ = map_predictions(model, test.x, test.y)
    return nmse_score(test.y, mean)


def msd(model: Model, test: Dataset) -> float:
    """MSD of each test point under its MAP component's noisy predictive."""
    mean, variance, _ = map_predictions(model, test.x, test.y)
    return msd_score(test.y, mean, variance)


def evaluate(model: Model, test: Dataset) -> EvaluationReport:
    """Score a fitted model on held-out data."""
    mean, variance, labels = map_predictions(model, test.x, test.y)
    k = model.k_components if isinstance(model, OmgpModel) else 1
    report = EvaluationReport(
        nmse_percent=nmse_score(test.y, mean),
        msd=msd_score(test.y, mean, variance),
        per_component_counts=np.bincount(labels, minlength=k).tolist(),
        n_test=len(test),
        model_kind=model_kind(model),
    )
    logger.info("NMSE %.3f%%, MSD %.3f on %d points", report.nmse_percent, report.msd, len(test))
    return report


# ---------------------------------------------------------------------------
# Entropy and simplex
# ---------------------------------------------------------------------------


def _check_simplex(posterior) -> np.ndarray:
    p = np.asarray(posterior, dtype=float)
    if p.shape[-1] == 0 or np.any(p < -SIMPLEX_TOLERANCE) or np.any(
        np.abs(p.sum(axis=-1) - 1.0) > SIMPLEX_TOLERANCE
    ):
        raise InvalidSimplex("posterior must be non-negative and sum to 1")
    return np.clip(p, 0.0, None)


def entropy(posterior) -> float:
    """Shannon entropy in nats, with 0 log 0 = 0."""
    p = _check_simplex(np.asarray(posterior, dtype=float).ravel())
    return float(np.sum(entr(p)))


def entropies(posteriors) -> np.ndarray:
    """Row-wise entropy of an M x K posterior matrix."""
    return np.sum(entr(_check_simplex(np.atleast_2d(posteriors))), axis=1)


def default_threshold(k: int) -> float:
    return 0.8 * float(np.log(k))


def simplex_coords(posterior) -> np.ndarray:
    """
    Barycentric-to-Cartesian map of a 3-component posterior onto the
    triangle (0, 0), (1, 0), (0.5, sqrt(3)/2).
    """
    p = np.asarray(posterior, dtype=float)
    if p.shape[-1] != 3:
        raise WrongDimension(f"simplex plot needs 3 components, got {p.shape[-1]}")
    return _check_simplex(p) @ _TRIANGLE


def score_stream(
    model: OmgpModel,
    observations: Iterable[tuple[float, float]],
    entropy_threshold: Optional[float] = None,
) -> list[NoveltyRecord]:
    """
    Classify incoming observations and flag uncertain ones.

    Args:
        model: Fitted OMGP
        observations: (x, y) pairs in model coordinates
        entropy_threshold: Flag when entropy exceeds this; defaults to
            0.8 log K

    Returns:
        One NoveltyRecord per observation, in order
    """
    pairs = [(float(x), float(y)) for x, y in observations]
    if not pairs:
        return []
    threshold = (
        default_threshold(model.k_components) if entropy_threshold is None else entropy_threshold
    )
    xs, ys = (np.array(column) for column in zip(*pairs))
    posteriors = classify_posteriors(model, xs, ys)
    scores = entropies(posteriors)

    records = []
    for (x, y), posterior, h in zip(pairs, posteriors, scores):
        records.append(
            NoveltyRecord(
                x=x,
                y=y,
                posterior=posterior,
                entropy=float(h),
                map_component=int(np.argmax(posterior)),
                flagged=bool(h > threshold),
            )
        )
    flagged = sum(r.flagged for r in records)
    if flagged:
        logger.info("%d of %d observations above entropy %.3f", flagged, len(records), threshold)
    return records


# ---------------------------------------------------------------------------
# Cross-validation over K
# ---------------------------------------------------------------------------


@dataclass
class CrossValidationResult:
    """Final corrected bounds per candidate K over seeded repeats."""

    k_values: list[int]
    bounds: np.ndarray  # len(k_values) x repeats
    means: np.ndarray = field(init=False)
    stds: np.ndarray = field(init=False)

    def __post_init__(self):
        self.bounds = np.atleast_2d(np.asarray(self.bounds, dtype=float))
        self.means = self.bounds.mean(axis=1)
        self.stds = self.bounds.std(axis=1)

    @property
    def selected_k(self) -> int:
        return int(self.k_values[int(np.argmax(self.means))])

    def rows(self) -> list[dict]:
        return [
            {"k": k, "mean_bound": float(m), "std_bound": float(s), "repeats": self.bounds.shape[1]}
            for k, m, s in zip(self.k_values, self.means, self.stds)
        ]


def cross_validate_k(
    data: Dataset,
    k_range: Sequence[int],
    repeats: int = 12,
    seed: int = 0,
    config: Optional[OmgpConfig] = None,
    prior_template: Callable[[Dataset, int], OmgpPrior] = default_omgp_prior,
    workers: int = 1,
) -> CrossValidationResult:
    """
    Fit the OMGP for each candidate K with seeded repeats.

    Args:
        data: Full training set; the training bound is compared
        k_range: Candidate component counts
        repeats: Independent restarts per K
        seed: Root seed; each (K, repeat) gets its own spawned stream
        config: EM settings
        prior_template: Builds the starting prior for a given K
        workers: Threads used to run repeats concurrently

    Returns:
        CrossValidationResult with mean/std of the final bound per K
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    k_values = [int(k) for k in k_range]
    children = np.random.SeedSequence(seed).spawn(len(k_values) * repeats)
    jobs = [
        (i, r, k, int(children[i * repeats + r].generate_state(1)[0]))
        for i, k in enumerate(k_values)
        for r in range(repeats)
    ]

    def run(job) -> tuple[int, int, float]:
        i, r, k, job_seed = job
        model = fit_omgp(data, prior_template(data, k), config, seed=job_seed)
        logger.info("K=%d repeat %d: bound %.4f", k, r, model.bound)
        return i, r, model.bound

    bounds = np.empty((len(k_values), repeats))
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for i, r, value in pool.map(run, jobs):
            bounds[i, r] = value

    return CrossValidationResult(k_values=k_values, bounds=bounds)
