"""Data models, loading and synthetic scenarios."""

from .models import (
    Dataset,
    EvaluationReport,
    NormStats,
    NoveltyRecord,
    RawRecord,
    SynthConfig,
)
from .loader import load_csv, load_dataset, normalize, split, write_csv

__all__ = [
    "Dataset",
    "EvaluationReport",
    "NormStats",
    "NoveltyRecord",
    "RawRecord",
    "SynthConfig",
    "load_csv",
    "load_dataset",
    "normalize",
    "split",
    "write_csv",
]
