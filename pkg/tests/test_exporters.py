"""Tests for model files and CSV/JSON exports."""

import csv
import json

import numpy as np
import pytest

from src.core.functions import ConstantMean, SquaredExponentialKernel, ZeroMean
from src.core.gp import GpPrior, build_gp_model, default_prior
from src.core.hetgp import fit_hetgp
from src.core.monitoring import CrossValidationResult, score_stream
from src.core.omgp import (
    ComponentPrior,
    OmgpPrior,
    corrected_lower_bound,
    e_step,
    heteroscedastic_update,
    initial_state,
)
from src.data.models import NormStats
from src.exporters.csv_export import (
    export_classification,
    export_crossval,
    export_curves,
    export_simplex,
)
from src.exporters.json_export import export_to_json, export_to_jsonl, read_jsonl
from src.exporters.model_file import SCHEMA_VERSION, load_model, save_model
from src.utils.config import HetGpConfig
from src.utils.errors import CorruptModel, ModelIoError, SchemaVersionMismatch

STATS = NormStats(x_mean=7.0, x_std=4.0, y_mean=0.0, y_std=2000.0)


def _omgp(data, levels=(1.0, -1.0)):
    prior = OmgpPrior(
        component_priors=tuple(
            ComponentPrior(ConstantMean(level), SquaredExponentialKernel(0.3, 1.0))
            for level in levels
        ),
        shared_noise_std=0.1,
    )
    return e_step(initial_state(data, prior))


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


class TestModelFile:
    def test_gp_round_trip_predicts_identically(self, tmp_path, smooth_data):
        prior = GpPrior(ZeroMean(), SquaredExponentialKernel(1.0, 0.7), noise_std=0.05)
        model = build_gp_model(prior, smooth_data.x, smooth_data.y)
        path = save_model(model, tmp_path / "gp.json", STATS, {"seed": 4})
        loaded = load_model(path)
        query = np.linspace(-2, 2, 9)
        np.testing.assert_allclose(
            loaded.model.predict(query).mean, model.predict(query).mean, atol=1e-12
        )
        assert loaded.kind == "gp"
        assert loaded.norm_stats == STATS
        assert loaded.fit_info == {"seed": 4}

    def test_hetgp_round_trip(self, tmp_path, smooth_data, fast_opt):
        config = HetGpConfig(samples=20, max_outer=1, optimizer=fast_opt, noise_optimizer=fast_opt)
        model = fit_hetgp(smooth_data, default_prior(smooth_data, "zero"), config)
        loaded = load_model(save_model(model, tmp_path / "het.json")).model
        query = np.array([-1.0, 0.3])
        np.testing.assert_allclose(
            loaded.predict(query, include_noise=True).variance,
            model.predict(query, include_noise=True).variance,
            rtol=1e-10,
        )
        assert loaded.history == model.history

    def test_omgp_round_trip(self, tmp_path, two_line_data):
        model = _omgp(two_line_data)
        loaded = load_model(save_model(model, tmp_path / "omgp.json")).model
        np.testing.assert_allclose(loaded.responsibilities.pi_hat, model.responsibilities.pi_hat)
        assert loaded.bound_trace == model.bound_trace
        assert loaded.bound == pytest.approx(model.bound)

    def test_omgp_keeps_responsibility_floor(self, tmp_path, two_line_data):
        pi_hat = np.eye(2)[two_line_data.labels]
        prior = _omgp(two_line_data).prior
        model = e_step(initial_state(two_line_data, prior, pi_hat, responsibility_floor=1e-4))
        loaded = load_model(save_model(model, tmp_path / "floor.json")).model
        assert loaded.responsibility_floor == 1e-4
        assert corrected_lower_bound(loaded) == pytest.approx(model.bound, rel=1e-10)

    def test_heteroscedastic_omgp_round_trip(self, tmp_path, two_line_data, fast_omgp_config):
        model = heteroscedastic_update(_omgp(two_line_data), fast_omgp_config)
        loaded = load_model(save_model(model, tmp_path / "het_omgp.json"))
        assert loaded.kind == "omgp_het"
        np.testing.assert_allclose(loaded.model.train_noise, model.train_noise, rtol=1e-10)

    def test_document_is_canonical_json(self, tmp_path, two_line_data):
        path = save_model(_omgp(two_line_data), tmp_path / "m.json", fit_info={"seed": 1})
        document = json.loads(path.read_text(encoding="utf-8"))
        assert document["schema_version"] == SCHEMA_VERSION
        assert document["model_kind"] == "omgp"
        assert list(document) == sorted(document)
        assert "saved_at" in document["metadata"]

    def test_missing_file(self, tmp_path):
        with pytest.raises(ModelIoError):
            load_model(tmp_path / "nope.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(CorruptModel):
            load_model(path)

    def test_schema_version(self, tmp_path, two_line_data):
        path = save_model(_omgp(two_line_data), tmp_path / "m.json")
        document = json.loads(path.read_text(encoding="utf-8"))
        document["schema_version"] = SCHEMA_VERSION + 1
        path.write_text(json.dumps(document), encoding="utf-8")
        with pytest.raises(SchemaVersionMismatch):
            load_model(path)

    def test_missing_fields(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text(json.dumps({"schema_version": SCHEMA_VERSION}), encoding="utf-8")
        with pytest.raises(CorruptModel):
            load_model(path)

    def test_unknown_kind(self, tmp_path, two_line_data):
        path = save_model(_omgp(two_line_data), tmp_path / "m.json")
        document = json.loads(path.read_text(encoding="utf-8"))
        document["model_kind"] = "spline"
        path.write_text(json.dumps(document), encoding="utf-8")
        with pytest.raises(CorruptModel):
            load_model(path)


class TestCsvExports:
    def test_curves(self, tmp_path, two_line_data):
        model = _omgp(two_line_data)
        grid = np.linspace(-1, 1, 5)
        rows = _read_csv(export_curves(model, grid, tmp_path / "curves.csv", STATS))
        assert len(rows) == 2 * 5
        first = rows[0]
        power = float(first["mean"]) * 2000.0
        spread = 3.0 * float(first["std"]) * 2000.0
        assert float(first["power_upper"]) == pytest.approx(power + spread, abs=1e-5)
        assert float(first["power_lower"]) == pytest.approx(power - spread, abs=1e-5)
        assert float(first["wind_speed"]) == pytest.approx(3.0)

    def test_classification(self, tmp_path, two_line_data):
        model = _omgp(two_line_data)
        rows = _read_csv(export_classification(model, tmp_path / "labels.csv", STATS))
        assert len(rows) == len(two_line_data)
        assert [int(r["component"]) for r in rows] == two_line_data.labels.tolist()
        assert {"p0", "p1"} <= set(rows[0])

    def test_simplex(self, tmp_path, two_line_data):
        model = _omgp(two_line_data, levels=(1.0, -1.0, 0.0))
        records = score_stream(model, [(0.0, 1.0), (0.2, -1.0)])
        rows = _read_csv(export_simplex(records, tmp_path / "simplex.csv"))
        assert len(rows) == 2
        for row in rows:
            assert 0.0 <= float(row["u"]) <= 1.0
            assert 0.0 <= float(row["v"]) <= np.sqrt(3) / 2 + 1e-12

    def test_crossval(self, tmp_path):
        result = CrossValidationResult(k_values=[1, 2], bounds=[[1.0, 2.0], [3.0, 5.0]])
        rows = _read_csv(export_crossval(result, tmp_path / "cv.csv"))
        assert [int(r["selected"]) for r in rows] == [0, 1]
        assert float(rows[1]["mean_bound"]) == pytest.approx(4.0)


class TestJsonExports:
    def test_report(self, tmp_path):
        path = export_to_json({"nmse_percent": 1.5}, tmp_path / "r" / "report.json")
        assert json.loads(path.read_text(encoding="utf-8")) == {"nmse_percent": 1.5}

    def test_jsonl(self, tmp_path, two_line_data):
        records = score_stream(_omgp(two_line_data), [(0.0, 1.0), (0.1, -1.0), (0.2, 1.0)])
        rows = read_jsonl(export_to_jsonl(records, tmp_path / "scores.jsonl"))
        assert [r["map_component"] for r in rows] == [0, 1, 0]
