"""Tests for metrics, entropy scoring and component-count selection."""

import numpy as np
import pytest

from src.core.functions import ConstantMean, SquaredExponentialKernel, ZeroMean
from src.core.gp import GpPrior, build_gp_model
from src.core.monitoring import (
    CrossValidationResult,
    cross_validate_k,
    default_threshold,
    entropies,
    entropy,
    evaluate,
    map_predictions,
    model_kind,
    msd,
    msd_score,
    nmse,
    nmse_score,
    score_stream,
    simplex_coords,
)
from src.core.omgp import ComponentPrior, OmgpPrior, e_step, initial_state, omgp_predict
from src.data.models import Dataset
from src.data.synthetic import generate_synthetic, three_trend
from src.utils.config import OmgpConfig, OptimizerConfig
from src.utils.errors import DegenerateTargets, InvalidSimplex, WrongDimension


def _two_line_model(data):
    prior = OmgpPrior(
        component_priors=tuple(
            ComponentPrior(ConstantMean(level), SquaredExponentialKernel(0.3, 1.0))
            for level in (1.0, -1.0)
        ),
        shared_noise_std=0.1,
    )
    return e_step(initial_state(data, prior))


def _midpoint(model, x):
    predictions, _ = omgp_predict(model, [x])
    return float(np.mean([p.mean[0] for p in predictions]))


class TestScores:
    def test_perfect_prediction(self):
        assert nmse_score([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0

    def test_mean_prediction_is_one_hundred(self):
        y = np.array([1.0, 2.0, 3.0, 6.0])
        assert nmse_score(y, np.full(4, y.mean())) == pytest.approx(100.0)

    def test_constant_targets(self):
        with pytest.raises(DegenerateTargets):
            nmse_score([2.0, 2.0], [1.0, 3.0])

    def test_msd_of_standardised_residuals(self):
        assert msd_score([1.0, -1.0], [0.0, 0.0], [1.0, 1.0]) == pytest.approx(1.0)
        assert msd_score([2.0], [0.0], [4.0]) == pytest.approx(1.0)

    def test_halving_variances_doubles_msd(self, rng):
        y = rng.standard_normal(50)
        mean = 0.3 * rng.standard_normal(50)
        variance = rng.uniform(0.2, 2.0, 50)
        assert msd_score(y, mean, variance / 2) == pytest.approx(2 * msd_score(y, mean, variance))

    def test_msd_of_calibrated_draws_is_near_one(self, rng):
        mean = rng.uniform(-1.0, 1.0, 10_000)
        variance = rng.uniform(0.01, 0.5, 10_000)
        y = mean + np.sqrt(variance) * rng.standard_normal(10_000)
        assert msd_score(y, mean, variance) == pytest.approx(1.0, abs=0.05)

    def test_scores_ignore_test_order(self, two_line_data):
        model = _two_line_model(two_line_data)
        gen = np.random.default_rng(8)
        test = Dataset(x=gen.uniform(-1, 1, 40), y=np.where(gen.random(40) < 0.5, 1.0, -1.0))
        shuffled = test.subset(gen.permutation(40))
        assert nmse(model, shuffled) == pytest.approx(nmse(model, test), rel=1e-12)
        assert msd(model, shuffled) == pytest.approx(msd(model, test), rel=1e-12)

    def test_single_gp_metrics(self, smooth_data):
        prior = GpPrior(ZeroMean(), SquaredExponentialKernel(1.0, 0.7), noise_std=0.05)
        model = build_gp_model(prior, smooth_data.x, smooth_data.y)
        assert nmse(model, smooth_data) < 1.0
        assert 0.0 < msd(model, smooth_data) < 2.0
        mean, variance, labels = map_predictions(model, smooth_data.x, smooth_data.y)
        assert np.all(labels == 0)
        assert np.all(variance > 0.05**2)

    def test_mixture_uses_map_component(self, two_line_data):
        model = _two_line_model(two_line_data)
        mean, _, labels = map_predictions(model, two_line_data.x, two_line_data.y)
        np.testing.assert_array_equal(labels, two_line_data.labels)
        np.testing.assert_allclose(np.sign(mean), np.sign(two_line_data.y))

    def test_evaluation_report(self, two_line_data):
        model = _two_line_model(two_line_data)
        report = evaluate(model, two_line_data)
        assert report.model_kind == "omgp"
        assert report.n_test == len(two_line_data)
        assert sum(report.per_component_counts) == len(two_line_data)
        assert report.nmse_percent < 1.0
        assert set(report.to_dict()) >= {"nmse_percent", "msd", "evaluated_at"}

    def test_model_kinds(self, smooth_data, two_line_data):
        prior = GpPrior(ZeroMean(), SquaredExponentialKernel(), noise_std=0.1)
        assert model_kind(build_gp_model(prior, smooth_data.x, smooth_data.y)) == "gp"
        assert model_kind(_two_line_model(two_line_data)) == "omgp"


class TestEntropy:
    def test_one_hot(self):
        assert entropy([1.0, 0.0, 0.0]) == 0.0

    def test_uniform(self):
        assert entropy([1 / 3] * 3) == pytest.approx(np.log(3))

    def test_rows(self):
        values = entropies([[0.5, 0.5], [1.0, 0.0]])
        np.testing.assert_allclose(values, [np.log(2), 0.0])

    @pytest.mark.parametrize("bad", [[0.5, 0.6], [1.2, -0.2], []])
    def test_rejects_non_simplex(self, bad):
        with pytest.raises(InvalidSimplex):
            entropy(bad)

    def test_default_threshold(self):
        assert default_threshold(3) == pytest.approx(0.8 * np.log(3))
        assert default_threshold(1) == 0.0


class TestSimplex:
    def test_vertices(self):
        np.testing.assert_allclose(simplex_coords([1, 0, 0]), [0.0, 0.0])
        np.testing.assert_allclose(simplex_coords([0, 1, 0]), [1.0, 0.0])
        np.testing.assert_allclose(simplex_coords([0, 0, 1]), [0.5, np.sqrt(3) / 2])

    def test_centroid(self):
        np.testing.assert_allclose(simplex_coords([1 / 3] * 3), [0.5, np.sqrt(3) / 6])

    def test_wrong_dimension(self):
        with pytest.raises(WrongDimension):
            simplex_coords([0.5, 0.5])


class TestScoreStream:
    def test_confident_points_are_not_flagged(self, two_line_data):
        model = _two_line_model(two_line_data)
        records = score_stream(model, [(0.0, 1.0), (0.5, -1.0)])
        assert [r.map_component for r in records] == [0, 1]
        assert not any(r.flagged for r in records)

    def test_ambiguous_point_is_flagged(self, two_line_data):
        model = _two_line_model(two_line_data)
        (record,) = score_stream(model, [(0.0, _midpoint(model, 0.0))])
        assert record.entropy == pytest.approx(np.log(2), abs=0.05)
        assert record.flagged

    def test_explicit_threshold(self, two_line_data):
        model = _two_line_model(two_line_data)
        (record,) = score_stream(model, [(0.0, _midpoint(model, 0.0))], entropy_threshold=1.0)
        assert not record.flagged

    def test_empty_stream(self, two_line_data):
        assert score_stream(_two_line_model(two_line_data), []) == []

    def test_record_export(self, two_line_data):
        (record,) = score_stream(_two_line_model(two_line_data), [(0.2, 0.9)])
        payload = record.to_dict()
        assert payload["map_component"] == 0
        assert sum(payload["posterior"]) == pytest.approx(1.0)


class TestCrossValidation:
    def test_result_statistics(self):
        result = CrossValidationResult(k_values=[1, 2, 3], bounds=[[1, 3], [5, 7], [4, 4]])
        np.testing.assert_allclose(result.means, [2, 6, 4])
        np.testing.assert_allclose(result.stds, [1, 1, 0])
        assert result.selected_k == 2
        assert result.rows()[1] == {"k": 2, "mean_bound": 6.0, "std_bound": 1.0, "repeats": 2}

    def test_two_lines_prefer_two_components(self, two_line_data):
        config = OmgpConfig(max_em=4, m_step=OptimizerConfig(restarts=1, max_iter=30))
        result = cross_validate_k(two_line_data, [1, 2], repeats=2, seed=3, config=config)
        assert result.bounds.shape == (2, 2)
        assert result.selected_k == 2

    def test_workers_do_not_change_results(self, two_line_data):
        config = OmgpConfig(max_em=2, m_step=OptimizerConfig(restarts=1, max_iter=10))
        serial = cross_validate_k(two_line_data, [1, 2], repeats=2, seed=1, config=config)
        threaded = cross_validate_k(
            two_line_data, [1, 2], repeats=2, seed=1, config=config, workers=2
        )
        np.testing.assert_array_equal(serial.bounds, threaded.bounds)

    def test_rejects_zero_repeats(self, two_line_data):
        with pytest.raises(ValueError):
            cross_validate_k(two_line_data, [1], repeats=0)

    @pytest.mark.slow
    def test_three_trend_data_selects_three_components(self):
        data = generate_synthetic(three_trend(n_points=300, seed=11))
        config = OmgpConfig(max_em=8, m_step=OptimizerConfig(restarts=1, max_iter=40))
        result = cross_validate_k(data, range(1, 6), repeats=3, seed=0, config=config, workers=4)
        assert result.selected_k == 3
