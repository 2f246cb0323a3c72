"""Export modules for model files, curves and reports."""

from .csv_export import export_classification, export_crossval, export_curves, export_simplex
from .json_export import export_to_json, export_to_jsonl
from .model_file import ModelFile, load_model, save_model

__all__ = [
    "export_classification",
    "export_crossval",
    "export_curves",
    "export_simplex",
    "export_to_json",
    "export_to_jsonl",
    "ModelFile",
    "load_model",
    "save_model",
]
