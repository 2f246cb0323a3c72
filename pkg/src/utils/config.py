"""Configuration management for curvemix."""

import os
from dataclasses import dataclass, field

from dotenv import load_dotenv

# Load .env file
load_dotenv()


@dataclass(frozen=True)
class OptimizerConfig:
    """Quasi-Newton hyperparameter search settings."""

    restarts: int = 5
    max_iter: int = 200
    tolerance: float = 1e-6  # relative change of the objective
    fd_step: float = 1e-5  # central-difference step in parameter space

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass(frozen=True)
class HetGpConfig:
    """Most-likely heteroscedastic loop settings."""

    samples: int = 100
    max_outer: int = 10
    tolerance: float = 1e-4
    variance_floor: float = 1e-8
    min_points: int = 10
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    noise_optimizer: OptimizerConfig = field(
        default_factory=lambda: OptimizerConfig(restarts=3, max_iter=100)
    )


@dataclass(frozen=True)
class OmgpConfig:
    """Variational EM settings for the overlapping mixture."""

    max_inner: int = 50
    max_em: int = 30
    inner_tolerance: float = 1e-6
    em_tolerance: float = 1e-5
    em_restarts: int = 1  # whole EM runs from fresh seeds; the best final bound wins
    init_perturbation: float = 0.05
    responsibility_floor: float = 1e-12
    het_min_points: int = 10
    m_step: OptimizerConfig = field(
        default_factory=lambda: OptimizerConfig(restarts=1, max_iter=50)
    )
    het: HetGpConfig = field(
        default_factory=lambda: HetGpConfig(
            max_outer=3,
            optimizer=OptimizerConfig(restarts=1, max_iter=50),
            noise_optimizer=OptimizerConfig(restarts=2, max_iter=100),
        )
    )

    def __post_init__(self):
        if self.em_restarts < 1:
            raise ValueError("em_restarts must be >= 1")
        if not 0 < self.responsibility_floor < 1:
            raise ValueError("responsibility_floor must lie in (0, 1)")


@dataclass(frozen=True)
class FilterConfig:
    """kNN outlier pre-filter defaults."""

    k: int = 10
    quantile: float = 0.995


@dataclass
class Config:
    """Application configuration."""

    log_level: str = "WARNING"
    seed: int = 0
    workers: int = 1
    data_path: str = "data.csv"

    @classmethod
    def from_env(cls) -> "Config":
        """Load configuration from environment variables."""
        return cls(
            log_level=os.getenv("CURVEMIX_LOG", "WARNING"),
            seed=int(os.getenv("CURVEMIX_SEED", "0")),
            workers=max(1, int(os.getenv("CURVEMIX_WORKERS", "1"))),
            data_path=os.getenv("CURVEMIX_DATA", "data.csv"),
        )


# Global config instance
config = Config.from_env()
