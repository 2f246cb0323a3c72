"""Tests for homoscedastic GP regression."""

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from src.core.functions import ConstantMean, SquaredExponentialKernel, ZeroMean
from src.core.gp import (
    LOG_2PI,
    GpPrior,
    PredictiveDistribution,
    build_gp_model,
    default_prior,
    fit_gp,
    gp_predict,
    joint_log_likelihood,
    nlml,
)
from src.data.models import Dataset
from src.utils.config import OptimizerConfig
from src.utils.errors import EmptyInput, InsufficientData, InvalidHyperparameter

HALF = np.sqrt(0.5)


def _unit_prior():
    # k(x, x) + noise = 0.5 + 0.5 = 1
    return GpPrior(ZeroMean(), SquaredExponentialKernel(HALF, 1.0), noise_std=HALF)


def _random_prior():
    return GpPrior(ConstantMean(0.3), SquaredExponentialKernel(0.8, 0.6), noise_std=0.2)


class TestNlml:
    def test_standard_normal_point(self):
        data = Dataset(x=[0.0], y=[0.0])
        assert nlml(_unit_prior(), data) == pytest.approx(0.918939, abs=1e-6)

    def test_shifted_point(self):
        data = Dataset(x=[0.0], y=[2.0])
        assert nlml(_unit_prior(), data) == pytest.approx(2.0 + 0.5 * LOG_2PI)

    def test_matches_dense_density(self, rng):
        x = rng.uniform(-1, 1, 5)
        y = rng.standard_normal(5)
        prior = _random_prior()
        cov = prior.kernel.gram(x, x) + prior.noise_var * np.eye(5)
        expected = -multivariate_normal(mean=np.full(5, 0.3), cov=cov).logpdf(y)
        assert nlml(prior, Dataset(x=x, y=y)) == pytest.approx(expected, abs=1e-9)

    def test_per_point_noise(self, rng):
        x = rng.uniform(-1, 1, 4)
        y = rng.standard_normal(4)
        r = np.array([0.1, 0.2, 0.3, 0.4])
        prior = _random_prior()
        cov = prior.kernel.gram(x, x) + np.diag(r)
        expected = -multivariate_normal(mean=np.full(4, 0.3), cov=cov).logpdf(y)
        assert nlml(prior, Dataset(x=x, y=y), noise_var=r) == pytest.approx(expected, abs=1e-9)

    def test_empty_data(self):
        with pytest.raises(EmptyInput):
            nlml(_unit_prior(), Dataset(x=[], y=[]))


class TestPredict:
    def test_empty_training_set_reverts_to_prior(self):
        prior = _random_prior()
        model = build_gp_model(prior, [], [])
        query = np.array([-1.0, 0.0, 2.0])
        pred = gp_predict(model, query, include_noise=True)
        np.testing.assert_allclose(pred.mean, 0.3)
        np.testing.assert_allclose(pred.variance, 0.64 + 0.04)

    def test_interpolates_with_tiny_noise(self, rng):
        x = np.linspace(-1, 1, 6)
        y = np.sin(2 * x)
        prior = GpPrior(ZeroMean(), SquaredExponentialKernel(1.0, 0.5), noise_std=1e-6)
        model = build_gp_model(prior, x, y)
        pred = gp_predict(model, x[2])
        assert pred.mean[0] == pytest.approx(y[2], abs=1e-3)

    def test_matches_dense_conditioning(self, rng):
        x = rng.uniform(-1, 1, 4)
        y = rng.standard_normal(4)
        query = np.array([-0.5, 0.1, 0.9])
        prior = _random_prior()
        model = build_gp_model(prior, x, y)
        pred = gp_predict(model, query, full_cov=True)

        K = prior.kernel.gram(x, x) + prior.noise_var * np.eye(4)
        Ks = prior.kernel.gram(x, query)
        Kss = prior.kernel.gram(query, query)
        K_inv = np.linalg.inv(K)
        mean = 0.3 + Ks.T @ K_inv @ (y - 0.3)
        cov = Kss - Ks.T @ K_inv @ Ks
        np.testing.assert_allclose(pred.mean, mean, atol=1e-9)
        np.testing.assert_allclose(pred.covariance, cov, atol=1e-9)
        np.testing.assert_allclose(pred.variance, np.diag(cov), atol=1e-9)

    def test_training_order_does_not_matter(self, smooth_data, rng):
        order = rng.permutation(len(smooth_data))
        query = np.linspace(-2.5, 2.5, 9)
        model = build_gp_model(_random_prior(), smooth_data.x, smooth_data.y)
        shuffled = build_gp_model(_random_prior(), smooth_data.x[order], smooth_data.y[order])
        a = gp_predict(model, query, include_noise=True)
        b = gp_predict(shuffled, query, include_noise=True)
        np.testing.assert_allclose(b.mean, a.mean, atol=1e-9)
        np.testing.assert_allclose(b.variance, a.variance, atol=1e-9)

    def test_constant_mean_is_a_shift_of_zero_mean(self, smooth_data):
        query = np.linspace(-2.5, 2.5, 9)
        kernel = SquaredExponentialKernel(0.8, 0.6)
        shifted = build_gp_model(
            GpPrior(ConstantMean(0.3), kernel, noise_std=0.2), smooth_data.x, smooth_data.y
        )
        centred = build_gp_model(
            GpPrior(ZeroMean(), kernel, noise_std=0.2), smooth_data.x, smooth_data.y - 0.3
        )
        a = gp_predict(shifted, query, include_noise=True)
        b = gp_predict(centred, query, include_noise=True)
        np.testing.assert_allclose(a.mean, b.mean + 0.3, atol=1e-10)
        np.testing.assert_allclose(a.variance, b.variance, atol=1e-12)

    def test_noise_adds_to_variance(self, smooth_data):
        model = build_gp_model(_random_prior(), smooth_data.x, smooth_data.y)
        latent = model.predict([0.0])
        noisy = model.predict([0.0], include_noise=True)
        assert noisy.variance[0] == pytest.approx(latent.variance[0] + 0.04)

    def test_per_query_noise(self, smooth_data):
        model = build_gp_model(_random_prior(), smooth_data.x, smooth_data.y)
        latent = model.predict([0.0, 1.0])
        noisy = model.predict([0.0, 1.0], include_noise=True, query_noise_var=[0.5, 1.0])
        np.testing.assert_allclose(noisy.variance - latent.variance, [0.5, 1.0])

    def test_variance_is_floored(self):
        prior = GpPrior(ZeroMean(), SquaredExponentialKernel(1.0, 1.0), noise_std=1e-4)
        model = build_gp_model(prior, [0.0], [1.0])
        assert model.predict([0.0]).variance[0] >= 1e-12

    def test_noise_length_mismatch(self):
        with pytest.raises(InvalidHyperparameter):
            build_gp_model(_random_prior(), [0.0, 1.0], [0.0, 1.0], noise_var=[0.1])


class TestJointLogLikelihood:
    class _Stub:
        def __init__(self, offset=0.0):
            self.offset = offset

        def predict(self, x, include_noise=True):
            x = np.asarray(x, dtype=float)
            return PredictiveDistribution(mean=x + self.offset, variance=np.ones_like(x))

    def test_single_point(self):
        data = Dataset(x=[0.4], y=[0.4])
        assert joint_log_likelihood(self._Stub(), data) == pytest.approx(-0.5 * LOG_2PI)

    def test_perfect_mean(self):
        data = Dataset(x=np.arange(7.0), y=np.arange(7.0))
        assert joint_log_likelihood(self._Stub(), data) == pytest.approx(-3.5 * LOG_2PI)

    def test_matches_per_point_density(self, smooth_data):
        model = build_gp_model(_random_prior(), smooth_data.x[:40], smooth_data.y[:40])
        test = smooth_data.subset(np.arange(40, 80))
        pred = model.predict(test.x, include_noise=True)
        z2 = (test.y - pred.mean) ** 2 / pred.variance
        expected = np.sum(-0.5 * LOG_2PI - 0.5 * np.log(pred.variance) - 0.5 * z2)
        assert joint_log_likelihood(model, test) == pytest.approx(expected, abs=1e-10)

    def test_empty(self):
        assert joint_log_likelihood(self._Stub(), Dataset(x=[], y=[])) == 0.0


class TestFitGp:
    def test_needs_two_points(self):
        with pytest.raises(InsufficientData):
            fit_gp(Dataset(x=[0.0], y=[1.0]), _random_prior())

    def test_improves_marginal_likelihood(self, smooth_data, fast_opt):
        prior = default_prior(smooth_data, mean_kind="zero")
        model = fit_gp(smooth_data, prior, fast_opt)
        assert model.nlml <= nlml(prior, smooth_data) + 1e-9
        assert all(b <= a + 1e-9 for a, b in zip(model.trace, model.trace[1:]))

    def test_tracks_soft_clip_data(self, fast_opt):
        from src.core.functions import SoftClipMean

        x = np.linspace(-2, 2, 80)
        y = SoftClipMean(1.0, 1.0, 0.5, 8.0).evaluate(x)
        data = Dataset(x=x, y=y)
        model = fit_gp(data, default_prior(data), fast_opt)
        pred = model.predict(x)
        nmse = 100 * np.mean((pred.mean - y) ** 2) / np.var(y)
        assert nmse < 1.0

    def test_fixed_noise_is_not_optimised(self, smooth_data, fast_opt):
        prior = default_prior(smooth_data, mean_kind="constant")
        r = np.full(len(smooth_data), 0.01)
        model = fit_gp(smooth_data, prior, fast_opt, noise_var=r)
        assert model.prior.noise_std == prior.noise_std
        np.testing.assert_allclose(model.noise_var, r)

    @pytest.mark.slow
    def test_recovers_generating_hyperparameters(self):
        gen = np.random.default_rng(5)
        x = np.sort(gen.uniform(-3, 3, 200))
        kernel = SquaredExponentialKernel(1.0, 0.3)
        cov = kernel.gram(x, x) + 1e-10 * np.eye(200)
        y = gen.multivariate_normal(np.zeros(200), cov) + 0.1 * gen.standard_normal(200)
        start = GpPrior(ZeroMean(), SquaredExponentialKernel(0.5, 0.6), noise_std=0.3)
        model = fit_gp(Dataset(x=x, y=y), start, OptimizerConfig(restarts=3, max_iter=200))
        assert model.prior.kernel.process_std == pytest.approx(1.0, rel=0.25)
        assert model.prior.kernel.length_scale == pytest.approx(0.3, rel=0.25)
        assert model.prior.noise_std == pytest.approx(0.1, rel=0.25)


class TestDefaultPrior:
    def test_soft_clip_starts_at_data_top(self, three_trend_data):
        prior = default_prior(three_trend_data)
        assert prior.mean.alpha1 == pytest.approx(np.max(three_trend_data.y))
        assert prior.noise_std == pytest.approx(0.1 * np.std(three_trend_data.y))

    def test_unknown_mean(self, smooth_data):
        with pytest.raises(KeyError):
            default_prior(smooth_data, mean_kind="linear")

    def test_vector_round_trip(self):
        prior = _random_prior()
        rebuilt = prior.with_vector(prior.to_vector())
        assert rebuilt.noise_std == pytest.approx(0.2)
        assert GpPrior.from_dict(prior.to_dict()) == prior
