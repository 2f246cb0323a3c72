"""CSV export of plot-ready curves, classifications and model-selection tables."""

import csv
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ..core.monitoring import (
    CrossValidationResult,
    Model,
    component_predictions,
    simplex_coords,
)
from ..core.omgp import OmgpModel, classify_train
from ..data.models import NormStats, NoveltyRecord


def _prepare(output_path: Union[str, Path]) -> Path:
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    return output_path


def export_curves(
    model: Model,
    query_x: np.ndarray,
    output_path: Union[str, Path],
    norm_stats: Optional[NormStats] = None,
) -> Path:
    """
    Export each component's predictive mean and 3-sigma band on a grid.

    Values appear in model coordinates and, through ``norm_stats``, in
    physical units.

    Args:
        model: Fitted model
        query_x: Grid of inputs in model coordinates
        output_path: Output file path
        norm_stats: Physical scaling of the model coordinates

    Returns:
        Path to created file
    """
    output_path = _prepare(output_path)
    stats = norm_stats or NormStats()
    query_x = np.asarray(query_x, dtype=float).ravel()

    fieldnames = [
        "component",
        "x",
        "mean",
        "std",
        "wind_speed",
        "power_mean",
        "power_lower",
        "power_upper",
    ]
    with open(output_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames)
        writer.writeheader()

        for k, pred in enumerate(component_predictions(model, query_x)):
            for x, mean, std in zip(query_x, pred.mean, pred.std):
                power = mean * stats.y_std + stats.y_mean
                writer.writerow(
                    {
                        "component": k,
                        "x": repr(float(x)),
                        "mean": repr(float(mean)),
                        "std": repr(float(std)),
                        "wind_speed": round(x * stats.x_std + stats.x_mean, 6),
                        "power_mean": round(power, 6),
                        "power_lower": round(power - 3.0 * std * stats.y_std, 6),
                        "power_upper": round(power + 3.0 * std * stats.y_std, 6),
                    }
                )

    return output_path


def export_classification(
    model: OmgpModel,
    output_path: Union[str, Path],
    norm_stats: Optional[NormStats] = None,
) -> Path:
    """Export training points with their MAP component and responsibilities."""
    output_path = _prepare(output_path)
    stats = norm_stats or model.norm_stats
    labels = classify_train(model)
    pi_hat = model.responsibilities.pi_hat

    fieldnames = ["wind_speed", "power", "component"] + [
        f"p{k}" for k in range(model.k_components)
    ]
    with open(output_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames)
        writer.writeheader()
        for i, (x, y) in enumerate(zip(model.train_x, model.train_y)):
            row = {
                "wind_speed": round(x * stats.x_std + stats.x_mean, 6),
                "power": round(y * stats.y_std + stats.y_mean, 6),
                "component": int(labels[i]),
            }
            row.update({f"p{k}": round(float(p), 6) for k, p in enumerate(pi_hat[i])})
            writer.writerow(row)

    return output_path


def export_simplex(records: list[NoveltyRecord], output_path: Union[str, Path]) -> Path:
    """Export 3-component posteriors with their triangle coordinates."""
    output_path = _prepare(output_path)
    fieldnames = ["x", "y", "p0", "p1", "p2", "u", "v", "entropy", "flagged"]

    with open(output_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames)
        writer.writeheader()
        for record in records:
            u, v = simplex_coords(record.posterior)
            row = {"x": record.x, "y": record.y, "u": u, "v": v}
            row.update({f"p{k}": float(p) for k, p in enumerate(record.posterior)})
            row.update({"entropy": record.entropy, "flagged": int(record.flagged)})
            writer.writerow(row)

    return output_path


def export_crossval(result: CrossValidationResult, output_path: Union[str, Path]) -> Path:
    """Export mean and standard deviation of the final bound per K."""
    output_path = _prepare(output_path)
    fieldnames = ["k", "mean_bound", "std_bound", "repeats", "selected"]

    with open(output_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames)
        writer.writeheader()
        for row in result.rows():
            writer.writerow({**row, "selected": int(row["k"] == result.selected_k)})

    return output_path
