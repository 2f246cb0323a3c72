"""Multi-restart quasi-Newton minimisation with finite-difference gradients."""

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from ..utils.config import OptimizerConfig
from ..utils.errors import NumericalError, OptimizationFailed
from .functions import Bounds

logger = logging.getLogger(__name__)

# Objective value reported when a trial point cannot be evaluated
FAILED_VALUE = 1e25


@dataclass
class OptimizationResult:
    """Best point found across all restarts."""

    x: np.ndarray
    fun: float
    initial_fun: float
    restarts_run: int
    restarts_failed: int
    trace: list[float] = field(default_factory=list)  # accepted iterates of the best restart


def central_difference_gradient(
    f: Callable[[np.ndarray], float],
    x: np.ndarray,
    step: float = 1e-5,
) -> np.ndarray:
    """
    Gradient by central differences, one coordinate at a time.

    The step is scaled by max(1, |x_i|) so large log-parameters get a
    proportionate step.
    """
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for i in range(x.size):
        h = step * max(1.0, abs(x[i]))
        forward = x.copy()
        backward = x.copy()
        forward[i] += h
        backward[i] -= h
        grad[i] = (f(forward) - f(backward)) / (2.0 * h)
    return grad


def central_differences(
    f: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    step: float = 1e-5,
) -> Iterator[tuple[int, np.ndarray]]:
    """
    Yield (i, df/dx_i) by central differences for an array-valued ``f``.

    Each partial is yielded as soon as it is computed, so the Jacobian of a
    matrix-valued function is never held in memory at once.
    """
    x = np.asarray(x, dtype=float)
    for i in range(x.size):
        h = step * max(1.0, abs(x[i]))
        forward = x.copy()
        backward = x.copy()
        forward[i] += h
        backward[i] -= h
        yield i, (np.asarray(f(forward)) - np.asarray(f(backward))) / (2.0 * h)


def _safe(objective: Callable[[np.ndarray], float]) -> Callable[[np.ndarray], float]:
    """Wrap an objective so numerical failures become a large finite penalty."""

    def wrapped(x: np.ndarray) -> float:
        try:
            value = float(objective(x))
        except NumericalError:
            return FAILED_VALUE
        if not np.isfinite(value):
            return FAILED_VALUE
        return value

    return wrapped


def _safe_gradient(gradient: Callable[[np.ndarray], np.ndarray]) -> Callable:
    """Zero gradient where the objective itself is not evaluable."""

    def wrapped(x: np.ndarray) -> np.ndarray:
        try:
            grad = np.asarray(gradient(x), dtype=float)
        except NumericalError:
            return np.zeros_like(x)
        return np.where(np.isfinite(grad), grad, 0.0)

    return wrapped


def _clip(x: np.ndarray, bounds: Sequence[Bounds]) -> np.ndarray:
    lo = np.array([-np.inf if b[0] is None else b[0] for b in bounds])
    hi = np.array([np.inf if b[1] is None else b[1] for b in bounds])
    return np.clip(x, lo, hi)


def minimize_with_restarts(
    objective: Callable[[np.ndarray], float],
    x0: np.ndarray,
    bounds: Sequence[Bounds],
    plausible: Sequence[tuple[float, float]],
    opt: OptimizerConfig,
    rng: Optional[np.random.Generator] = None,
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> OptimizationResult:
    """
    Minimise an objective with L-BFGS-B from ``x0`` plus random restarts.

    Restart 0 starts at ``x0``; the others draw uniformly from the plausible
    window (log-uniform for positive parameters, since those live in
    log-space). The returned point is never worse than ``x0``.

    Args:
        objective: Function of the parameter vector; may raise NumericalError
        x0: Starting vector
        bounds: Hard bounds per coordinate (None for unbounded)
        plausible: Restart window per coordinate
        opt: Restart count, iteration cap and tolerance
        rng: Random generator for restart draws
        gradient: Exact gradient of ``objective``; central differences of
            the objective are used when omitted

    Returns:
        OptimizationResult with the best vector and value

    Raises:
        OptimizationFailed: every restart (and x0 itself) failed to evaluate
    """
    rng = rng or np.random.default_rng(0)
    f = _safe(objective)
    x0 = _clip(np.asarray(x0, dtype=float), bounds)

    initial_fun = f(x0)
    best_x, best_fun, best_trace = x0, initial_fun, [initial_fun]
    failed = 0

    if x0.size == 0:
        if initial_fun >= FAILED_VALUE:
            raise OptimizationFailed("objective cannot be evaluated")
        return OptimizationResult(x0, initial_fun, initial_fun, 0, 0, best_trace)

    lows = np.array([p[0] for p in plausible])
    highs = np.array([p[1] for p in plausible])

    if gradient is not None:
        jac = _safe_gradient(gradient)
    else:

        def jac(x):
            return central_difference_gradient(f, x, opt.fd_step)

    for restart in range(opt.restarts):
        start = x0 if restart == 0 else _clip(rng.uniform(lows, highs), bounds)
        start_fun = f(start)
        if start_fun >= FAILED_VALUE:
            failed += 1
            logger.debug("restart %d: start point not evaluable", restart)
            continue

        trace = [start_fun]
        try:
            result = minimize(
                f,
                start,
                jac=jac,
                method="L-BFGS-B",
                bounds=list(bounds),
                callback=lambda xk: trace.append(f(xk)),
                options={"maxiter": opt.max_iter, "ftol": opt.tolerance},
            )
        except (ValueError, FloatingPointError) as exc:
            failed += 1
            logger.debug("restart %d failed: %s", restart, exc)
            continue

        fun = float(result.fun)
        logger.debug("restart %d: %.6g -> %.6g (%d its)", restart, start_fun, fun, result.nit)
        if fun >= FAILED_VALUE:
            failed += 1
            continue
        if fun < best_fun:
            best_x, best_fun, best_trace = np.asarray(result.x, dtype=float), fun, trace

    if best_fun >= FAILED_VALUE:
        raise OptimizationFailed(f"all {opt.restarts} restarts failed")

    return OptimizationResult(
        x=best_x,
        fun=best_fun,
        initial_fun=initial_fun,
        restarts_run=opt.restarts,
        restarts_failed=failed,
        trace=best_trace,
    )
