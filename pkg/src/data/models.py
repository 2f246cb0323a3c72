"""Data models for curvemix."""

from dataclasses import dataclass, field
from datetime import datetime
from typing import TYPE_CHECKING, Optional, Union

import numpy as np

from ..utils.errors import DataError

if TYPE_CHECKING:
    from ..core.functions import ConstantMean, SoftClipMean, ZeroMean


@dataclass(frozen=True)
class RawRecord:
    """One SCADA observation in physical units."""

    turbine_id: str
    wind_speed: float  # m/s
    power: float  # kW
    timestamp: Optional[datetime] = None

    def __post_init__(self):
        if not (np.isfinite(self.wind_speed) and self.wind_speed >= 0):
            raise DataError(f"wind speed must be finite and >= 0, got {self.wind_speed}")
        if not np.isfinite(self.power):
            raise DataError(f"power must be finite, got {self.power}")


@dataclass(frozen=True)
class NormStats:
    """Affine map between physical units and model coordinates, per axis."""

    x_mean: float = 0.0
    x_std: float = 1.0
    y_mean: float = 0.0
    y_std: float = 1.0

    def to_dict(self) -> dict:
        return {
            "x_mean": self.x_mean,
            "x_std": self.x_std,
            "y_mean": self.y_mean,
            "y_std": self.y_std,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NormStats":
        return cls(**{key: float(data[key]) for key in ("x_mean", "x_std", "y_mean", "y_std")})


@dataclass
class Dataset:
    """Wind-speed/power observations in model (normalized) coordinates."""

    x: np.ndarray
    y: np.ndarray
    norm_stats: NormStats = field(default_factory=NormStats)
    labels: Optional[np.ndarray] = None  # ground-truth components, synthetic data only
    turbine_ids: Optional[list[str]] = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).ravel()
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.x.shape != self.y.shape:
            raise DataError(f"x and y lengths differ: {self.x.size} vs {self.y.size}")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=int).ravel()
            if self.labels.size != self.x.size:
                raise DataError("labels must have the same length as x")
        if self.norm_stats.x_std <= 0 or self.norm_stats.y_std <= 0:
            raise DataError("normalization std entries must be > 0")

    def __len__(self) -> int:
        return int(self.x.size)

    def subset(self, indices) -> "Dataset":
        """Select observations by index; labels and stats travel along."""
        indices = np.asarray(indices, dtype=int)
        return Dataset(
            x=self.x[indices],
            y=self.y[indices],
            norm_stats=self.norm_stats,
            labels=None if self.labels is None else self.labels[indices],
            turbine_ids=(
                None if self.turbine_ids is None else [self.turbine_ids[i] for i in indices]
            ),
        )

    def to_physical(self) -> tuple[np.ndarray, np.ndarray]:
        """Wind speed (m/s) and power (kW) arrays."""
        s = self.norm_stats
        return self.x * s.x_std + s.x_mean, self.y * s.y_std + s.y_mean


# ---------------------------------------------------------------------------
# Synthetic generator configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseProfile:
    """
    Observation noise standard deviation as a function of x.

    Constant when ``peak_std`` is None, otherwise a bell centred on
    ``center``: floor + (peak - floor) * exp(-(x - center)^2 / (2 width^2)).
    """

    floor_std: float = 0.02
    peak_std: Optional[float] = None
    center: float = 0.0
    width: float = 1.0

    def std(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.peak_std is None:
            return np.full_like(x, self.floor_std)
        bell = np.exp(-0.5 * (x - self.center) ** 2 / self.width**2)
        return self.floor_std + (self.peak_std - self.floor_std) * bell


@dataclass(frozen=True)
class ComponentSpec:
    """True mean curve and noise profile of one synthetic component."""

    mean: Union["SoftClipMean", "ConstantMean", "ZeroMean"]
    noise: NoiseProfile = field(default_factory=NoiseProfile)


@dataclass(frozen=True)
class SynthConfig:
    """Labeled synthetic scenario standing in for farm SCADA data."""

    n_points: int
    component_weights: tuple[float, ...]
    component_specs: tuple[ComponentSpec, ...]
    x_range: tuple[float, float] = (-1.5, 2.0)
    seed: int = 0
    norm_stats: NormStats = field(default_factory=NormStats)

    def __post_init__(self):
        if self.n_points < 1:
            raise DataError("n_points must be >= 1")
        if len(self.component_weights) != len(self.component_specs):
            raise DataError("one weight per component is required")
        weights = np.asarray(self.component_weights, dtype=float)
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise DataError("component weights must form a simplex")
        if not self.x_range[0] < self.x_range[1]:
            raise DataError("x_range must be increasing")


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class EvaluationReport:
    """Held-out performance of a fitted model."""

    nmse_percent: float
    msd: float
    per_component_counts: list[int]
    n_test: int
    model_kind: str = ""
    evaluated_at: datetime = field(default_factory=datetime.now)

    def to_dict(self) -> dict:
        """Convert to dictionary for export."""
        return {
            "model_kind": self.model_kind,
            "nmse_percent": self.nmse_percent,
            "msd": self.msd,
            "per_component_counts": list(self.per_component_counts),
            "n_test": self.n_test,
            "evaluated_at": self.evaluated_at.isoformat(),
        }


@dataclass
class NoveltyRecord:
    """Component posterior and entropy for one monitored observation."""

    x: float
    y: float
    posterior: np.ndarray
    entropy: float
    map_component: int
    flagged: bool

    def to_dict(self) -> dict:
        """Convert to dictionary for export."""
        return {
            "x": self.x,
            "y": self.y,
            "posterior": [float(p) for p in self.posterior],
            "entropy": self.entropy,
            "map_component": self.map_component,
            "flagged": self.flagged,
        }
