"""Gaussian-process models, mixtures and monitoring."""

from .functions import (
    ConstantKernel,
    ConstantMean,
    SoftClipMean,
    SquaredExponentialKernel,
    ZeroMean,
)
from .gp import GpModel, GpPrior, PredictiveDistribution, default_prior, fit_gp, gp_predict
from .hetgp import HetGpModel, NoiseProcess, fit_hetgp
from .omgp import (
    ComponentPrior,
    OmgpModel,
    OmgpPrior,
    Responsibilities,
    classify_posterior,
    default_omgp_prior,
    fit_omgp,
    heteroscedastic_update,
    omgp_predict,
)
from .monitoring import (
    CrossValidationResult,
    cross_validate_k,
    entropy,
    evaluate,
    msd,
    nmse,
    score_stream,
    simplex_coords,
)

__all__ = [
    "ConstantKernel",
    "ConstantMean",
    "SoftClipMean",
    "SquaredExponentialKernel",
    "ZeroMean",
    "GpModel",
    "GpPrior",
    "PredictiveDistribution",
    "default_prior",
    "fit_gp",
    "gp_predict",
    "HetGpModel",
    "NoiseProcess",
    "fit_hetgp",
    "ComponentPrior",
    "OmgpModel",
    "OmgpPrior",
    "Responsibilities",
    "classify_posterior",
    "default_omgp_prior",
    "fit_omgp",
    "heteroscedastic_update",
    "omgp_predict",
    "CrossValidationResult",
    "cross_validate_k",
    "entropy",
    "evaluate",
    "msd",
    "nmse",
    "score_stream",
    "simplex_coords",
]
