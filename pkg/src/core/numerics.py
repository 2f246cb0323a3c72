"""Stable SPD linear algebra and log-domain helpers.

Every quadratic form, determinant and solve in the inference modules goes
through this module; nothing else inverts a matrix.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.special import logsumexp

from ..utils.errors import DimensionMismatch, EmptyInput, NotPositiveDefinite

logger = logging.getLogger(__name__)

DEFAULT_MAX_JITTER = 1e-2
_SYMMETRY_RTOL = 1e-10


@dataclass(frozen=True)
class SpdFactorization:
    """Lower Cholesky factor of ``A + jitter_used * I``."""

    lower_factor: np.ndarray
    jitter_used: float = 0.0

    @property
    def size(self) -> int:
        return self.lower_factor.shape[0]


def cholesky_factor(A: np.ndarray, max_jitter: float = DEFAULT_MAX_JITTER) -> SpdFactorization:
    """
    Factorize a symmetric positive-definite matrix.

    Tries a plain Cholesky first, then retries with diagonal jitter growing
    tenfold from ``1e-10 * mean(diag(A))`` until ``max_jitter``.

    Args:
        A: Square symmetric matrix
        max_jitter: Largest diagonal jitter to try

    Returns:
        SpdFactorization recording the jitter that was needed

    Raises:
        DimensionMismatch: A is not square
        NotPositiveDefinite: A is asymmetric or fails at max_jitter
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {A.shape}")

    n = A.shape[0]
    if n == 0:
        return SpdFactorization(lower_factor=np.zeros((0, 0)))
    if not np.all(np.isfinite(A)):
        raise NotPositiveDefinite("matrix has non-finite entries")

    scale = max(1.0, float(np.max(np.abs(A))))
    if np.max(np.abs(A - A.T)) > _SYMMETRY_RTOL * scale:
        raise NotPositiveDefinite("matrix is not symmetric")

    try:
        return SpdFactorization(lower_factor=cholesky(A, lower=True))
    except LinAlgError:
        pass

    mean_diag = float(np.mean(np.diag(A)))
    jitter = 1e-10 * mean_diag if mean_diag > 0 else 1e-10
    identity = np.eye(n)
    while jitter <= max_jitter:
        try:
            lower = cholesky(A + jitter * identity, lower=True)
            logger.debug("Cholesky needed jitter %.3e", jitter)
            return SpdFactorization(lower_factor=lower, jitter_used=jitter)
        except LinAlgError:
            jitter *= 10.0

    raise NotPositiveDefinite(f"factorization failed with jitter up to {max_jitter:.1e}")


def _check_rows(fact: SpdFactorization, B: np.ndarray):
    if B.shape[0] != fact.size:
        raise DimensionMismatch(
            f"right-hand side has {B.shape[0]} rows, factorization has size {fact.size}"
        )


def solve_spd(fact: SpdFactorization, B: np.ndarray) -> np.ndarray:
    """Solve ``(L L^T) X = B`` with two triangular solves."""
    B = np.asarray(B, dtype=float)
    _check_rows(fact, B)
    if fact.size == 0:
        return B.copy()
    return cho_solve((fact.lower_factor, True), B)


def solve_lower(fact: SpdFactorization, B: np.ndarray) -> np.ndarray:
    """Solve ``L X = B`` (half of an SPD solve, used for quadratic forms)."""
    B = np.asarray(B, dtype=float)
    _check_rows(fact, B)
    if fact.size == 0:
        return B.copy()
    return solve_triangular(fact.lower_factor, B, lower=True)


def log_det(fact: SpdFactorization) -> float:
    """Log-determinant of the factorized matrix."""
    return float(2.0 * np.sum(np.log(np.diag(fact.lower_factor))))


def log_sum_exp(v) -> float:
    """Stable ``log(sum(exp(v)))``."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0:
        raise EmptyInput("log_sum_exp of an empty vector")
    return float(logsumexp(v))


def normalize_log_rows(log_weights: np.ndarray) -> np.ndarray:
    """Turn a matrix of row-wise log-weights into row-stochastic probabilities."""
    log_weights = np.asarray(log_weights, dtype=float)
    if log_weights.shape[-1] == 0:
        raise EmptyInput("cannot normalize rows with no columns")
    log_norm = logsumexp(log_weights, axis=-1, keepdims=True)
    return np.exp(log_weights - log_norm)
