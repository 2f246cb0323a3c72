"""JSON model files: fitted hyperparameters plus the training data they condition on."""

import json
import logging
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ..core.gp import GpPrior, build_gp_model
from ..core.hetgp import HetGpModel, NoiseProcess, predict_noise
from ..core.monitoring import Model, model_kind
from ..core.omgp import RESPONSIBILITY_FLOOR, OmgpPrior, initial_state
from ..data.models import Dataset, NormStats
from ..utils.errors import CorruptModel, ModelIoError, SchemaVersionMismatch

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass
class ModelFile:
    """A fitted model with its normalization and fit record."""

    model: Model
    norm_stats: NormStats = field(default_factory=NormStats)
    fit_info: dict = field(default_factory=dict)  # seed, split, trace; deterministic
    metadata: dict = field(default_factory=dict)  # timestamps only

    @property
    def kind(self) -> str:
        return model_kind(self.model)


def _model_payload(model: Model) -> dict:
    kind = model_kind(model)
    if kind == "gp":
        return {
            "prior": model.prior.to_dict(),
            "train": {"x": model.train_x.tolist(), "y": model.train_y.tolist()},
            "trace": list(model.trace),
        }
    if kind == "hetgp":
        f = model.f_model
        return {
            "prior": f.prior.to_dict(),
            "train": {"x": f.train_x.tolist(), "y": f.train_y.tolist()},
            "noise_process": model.noise_process.to_dict(),
            "trace": list(model.history),
        }
    return {
        "prior": model.prior.to_dict(),
        "train": {"x": model.train_x.tolist(), "y": model.train_y.tolist()},
        "responsibilities": model.responsibilities.pi_hat.tolist(),
        "responsibility_floor": model.responsibility_floor,
        "noise_processes": (
            None
            if model.noise_processes is None
            else [None if p is None else p.to_dict() for p in model.noise_processes]
        ),
        "trace": list(model.bound_trace),
    }


def _rebuild(kind: str, payload: dict, norm_stats: NormStats) -> Model:
    x = np.asarray(payload["train"]["x"], dtype=float)
    y = np.asarray(payload["train"]["y"], dtype=float)
    trace = [float(v) for v in payload.get("trace", [])]

    if kind == "gp":
        model = build_gp_model(GpPrior.from_dict(payload["prior"]), x, y)
        return replace(model, trace=trace)
    if kind == "hetgp":
        noise = NoiseProcess.from_dict(payload["noise_process"])
        f_model = build_gp_model(
            GpPrior.from_dict(payload["prior"]), x, y, noise_var=predict_noise(noise, x)
        )
        return HetGpModel(f_model=f_model, noise_process=noise, history=trace)
    if kind in ("omgp", "omgp_het"):
        processes = payload.get("noise_processes")
        if processes is not None:
            processes = [None if p is None else NoiseProcess.from_dict(p) for p in processes]
        state = initial_state(
            Dataset(x=x, y=y, norm_stats=norm_stats),
            OmgpPrior.from_dict(payload["prior"]),
            np.asarray(payload["responsibilities"], dtype=float),
            processes,
            responsibility_floor=float(payload.get("responsibility_floor", RESPONSIBILITY_FLOOR)),
        )
        return replace(state, bound_trace=trace)
    raise CorruptModel(f"unknown model kind '{kind}'")


def save_model(
    model: Model,
    path: Union[str, Path],
    norm_stats: Optional[NormStats] = None,
    fit_info: Optional[dict] = None,
) -> Path:
    """
    Write a model file as canonical JSON (sorted keys).

    Args:
        model: Fitted GP, het-GP or OMGP
        path: Destination file
        norm_stats: Physical-unit scaling of the training data
        fit_info: Deterministic fit record (seed, split, settings)

    Returns:
        Path to the written file
    """
    path = Path(path)
    if norm_stats is None:
        norm_stats = getattr(model, "norm_stats", None) or NormStats()
    document = {
        "schema_version": SCHEMA_VERSION,
        "model_kind": model_kind(model),
        "norm_stats": norm_stats.to_dict(),
        "fit": dict(fit_info or {}),
        "model": _model_payload(model),
        "metadata": {"saved_at": datetime.now().isoformat()},
    }
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(document, f, sort_keys=True, indent=1)
    except OSError as exc:
        raise ModelIoError(f"cannot write model file {path}: {exc}") from exc
    logger.info("Saved %s model to %s", document["model_kind"], path)
    return path


def load_model(path: Union[str, Path]) -> ModelFile:
    """
    Read a model file and rebuild the model it describes.

    Raises:
        ModelIoError: the file cannot be read
        SchemaVersionMismatch: the file uses another schema version
        CorruptModel: the content is malformed
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ModelIoError(f"cannot read model file {path}: {exc}") from exc

    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptModel(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(document, dict) or "schema_version" not in document:
        raise CorruptModel(f"{path} has no schema_version")
    if document["schema_version"] != SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"{path} has schema version {document['schema_version']}, expected {SCHEMA_VERSION}"
        )

    try:
        norm_stats = NormStats.from_dict(document["norm_stats"])
        model = _rebuild(document["model_kind"], document["model"], norm_stats)
    except CorruptModel:
        raise
    except (KeyError, TypeError, ValueError, ArithmeticError) as exc:
        raise CorruptModel(f"{path} is malformed: {exc}") from exc

    return ModelFile(
        model=model,
        norm_stats=norm_stats,
        fit_info=document.get("fit", {}),
        metadata=document.get("metadata", {}),
    )
