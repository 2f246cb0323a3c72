"""Tests for the restarted quasi-Newton minimiser."""

import numpy as np
import pytest

from src.core.optimizer import (
    FAILED_VALUE,
    central_difference_gradient,
    central_differences,
    minimize_with_restarts,
)
from src.utils.config import OptimizerConfig
from src.utils.errors import NotPositiveDefinite, OptimizationFailed


def quadratic(x):
    return float(np.sum((x - np.array([1.0, -2.0])) ** 2))


def test_central_difference_matches_analytic():
    x = np.array([0.3, 0.7])
    grad = central_difference_gradient(quadratic, x)
    np.testing.assert_allclose(grad, 2 * (x - np.array([1.0, -2.0])), atol=1e-6)


def test_central_differences_of_array_function():
    x = np.array([0.5, 2.0])
    partials = dict(central_differences(lambda v: np.outer(v, v), x))
    np.testing.assert_allclose(partials[0], [[1.0, 2.0], [2.0, 0.0]], atol=1e-6)
    np.testing.assert_allclose(partials[1], [[0.0, 0.5], [0.5, 4.0]], atol=1e-6)


def test_supplied_gradient_is_used():
    calls = []

    def gradient(x):
        calls.append(x.copy())
        return 2 * (x - np.array([1.0, -2.0]))

    result = minimize_with_restarts(
        quadratic,
        np.zeros(2),
        bounds=[(None, None), (None, None)],
        plausible=[(-1, 1), (-1, 1)],
        opt=OptimizerConfig(restarts=1, max_iter=100),
        gradient=gradient,
    )
    np.testing.assert_allclose(result.x, [1.0, -2.0], atol=1e-5)
    assert calls


def test_gradient_failures_do_not_raise():
    def gradient(x):
        if x[0] > 2.0:
            raise NotPositiveDefinite("unstable region")
        return np.array([2 * (x[0] - 1.0)])

    result = minimize_with_restarts(
        lambda x: float((x[0] - 1.0) ** 2),
        np.array([4.0]),
        bounds=[(-5, 5)],
        plausible=[(-5, 5)],
        opt=OptimizerConfig(restarts=2),
        rng=np.random.default_rng(1),
        gradient=gradient,
    )
    assert result.fun <= result.initial_fun
    assert result.x[0] == pytest.approx(1.0, abs=1e-3)


def test_finds_quadratic_minimum():
    result = minimize_with_restarts(
        quadratic,
        np.zeros(2),
        bounds=[(None, None), (None, None)],
        plausible=[(-1, 1), (-1, 1)],
        opt=OptimizerConfig(restarts=2, max_iter=100),
    )
    np.testing.assert_allclose(result.x, [1.0, -2.0], atol=1e-4)
    assert result.fun <= result.initial_fun
    assert result.restarts_run == 2


def test_respects_bounds():
    result = minimize_with_restarts(
        quadratic,
        np.zeros(2),
        bounds=[(-0.5, 0.5), (-0.5, 0.5)],
        plausible=[(-0.5, 0.5), (-0.5, 0.5)],
        opt=OptimizerConfig(restarts=1),
    )
    np.testing.assert_allclose(result.x, [0.5, -0.5], atol=1e-6)


def test_trace_is_non_increasing():
    result = minimize_with_restarts(
        quadratic,
        np.array([5.0, 5.0]),
        bounds=[(None, None), (None, None)],
        plausible=[(-1, 1), (-1, 1)],
        opt=OptimizerConfig(restarts=1),
    )
    assert result.trace[0] == pytest.approx(result.initial_fun)
    assert all(b <= a + 1e-12 for a, b in zip(result.trace, result.trace[1:]))


def test_never_worse_than_start():
    def bumpy(x):
        return float(np.sin(5 * x[0]) + 0.1 * x[0] ** 2)

    x0 = np.array([-0.3])
    result = minimize_with_restarts(
        bumpy,
        x0,
        bounds=[(-3, 3)],
        plausible=[(-3, 3)],
        opt=OptimizerConfig(restarts=4),
        rng=np.random.default_rng(0),
    )
    assert result.fun <= bumpy(x0)


def test_numerical_failures_are_penalised_not_raised():
    def fragile(x):
        if x[0] > 2.0:
            raise NotPositiveDefinite("unstable region")
        return float((x[0] - 1.0) ** 2)

    result = minimize_with_restarts(
        fragile,
        np.array([0.0]),
        bounds=[(-5, 5)],
        plausible=[(-5, 5)],
        opt=OptimizerConfig(restarts=3),
        rng=np.random.default_rng(2),
    )
    assert result.fun < FAILED_VALUE
    assert result.x[0] == pytest.approx(1.0, abs=1e-3)


def test_all_restarts_failing_raises():
    def broken(x):
        raise NotPositiveDefinite("always")

    with pytest.raises(OptimizationFailed):
        minimize_with_restarts(
            broken,
            np.array([0.0]),
            bounds=[(-1, 1)],
            plausible=[(-1, 1)],
            opt=OptimizerConfig(restarts=2),
        )


def test_rejects_zero_restarts():
    with pytest.raises(ValueError):
        OptimizerConfig(restarts=0)
