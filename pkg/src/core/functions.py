"""Prior mean functions and covariance kernels with their hyperparameters.

Every mean/kernel is an immutable dataclass that can flatten itself into an
unconstrained optimizer vector (positive fields in log-space) and rebuild
itself from one.
"""

from dataclasses import asdict, dataclass, fields, replace
from typing import ClassVar, Optional, Union

import numpy as np

from ..utils.errors import InvalidHyperparameter

Bounds = tuple[Optional[float], Optional[float]]

# Half-width of the restart window for unconstrained parameters
_UNCONSTRAINED_SPREAD = 0.25


def _softplus(z: np.ndarray) -> np.ndarray:
    """log(1 + e^z) without overflow."""
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def _as_inputs(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float)).ravel()


@dataclass(frozen=True)
class _Parametrised:
    """Shared vector plumbing for means and kernels."""

    KIND: ClassVar[str] = ""
    POSITIVE: ClassVar[tuple[str, ...]] = ()
    BOUNDS: ClassVar[dict[str, tuple[float, float]]] = {}
    PLAUSIBLE: ClassVar[dict[str, tuple[float, float]]] = {}

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in fields(self))

    @property
    def n_params(self) -> int:
        return len(fields(self))

    def to_vector(self) -> np.ndarray:
        values = []
        for name in self.param_names:
            value = getattr(self, name)
            if name in self.POSITIVE:
                lower = self.BOUNDS[name][0]
                value = np.log(max(value, lower))
            values.append(value)
        return np.array(values, dtype=float)

    def with_vector(self, vector: np.ndarray):
        vector = np.asarray(vector, dtype=float)
        if vector.size != self.n_params:
            raise InvalidHyperparameter(
                f"{type(self).__name__} expects {self.n_params} values, got {vector.size}"
            )
        updates = {}
        for name, value in zip(self.param_names, vector):
            updates[name] = float(np.exp(value)) if name in self.POSITIVE else float(value)
        return replace(self, **updates)

    def vector_bounds(self) -> list[Bounds]:
        bounds: list[Bounds] = []
        for name in self.param_names:
            if name in self.POSITIVE:
                lo, hi = self.BOUNDS[name]
                bounds.append((float(np.log(lo)), float(np.log(hi))))
            else:
                bounds.append((None, None))
        return bounds

    def plausible_bounds(self) -> list[tuple[float, float]]:
        """Window for random restart draws, in vector space."""
        vector = self.to_vector()
        window = []
        for name, value in zip(self.param_names, vector):
            if name in self.POSITIVE:
                lo, hi = self.PLAUSIBLE[name]
                window.append((float(np.log(lo)), float(np.log(hi))))
            else:
                window.append((value - _UNCONSTRAINED_SPREAD, value + _UNCONSTRAINED_SPREAD))
        return window

    def to_dict(self) -> dict:
        return {"kind": self.KIND, **asdict(self)}


# ---------------------------------------------------------------------------
# Mean functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ZeroMean(_Parametrised):
    """m(x) = 0."""

    KIND: ClassVar[str] = "zero"

    def evaluate(self, x) -> np.ndarray:
        return np.zeros_like(_as_inputs(x))


@dataclass(frozen=True)
class ConstantMean(_Parametrised):
    """m(x) = level."""

    KIND: ClassVar[str] = "constant"

    level: float = 0.0

    def evaluate(self, x) -> np.ndarray:
        return np.full_like(_as_inputs(x), self.level)


@dataclass(frozen=True)
class SoftClipMean(_Parametrised):
    """
    Scaled soft-clip sigmoid.

    m(x) = (alpha1 / beta) * log[(1 + e^{beta v}) / (1 + e^{beta (v - 1)})]
    with v = alpha2 * x + alpha3. Asymptotes are 0 (v -> -inf) and alpha1
    (v -> +inf); beta sets how sharply the curve turns into them.
    """

    KIND: ClassVar[str] = "soft_clip"
    POSITIVE: ClassVar[tuple[str, ...]] = ("beta",)
    BOUNDS: ClassVar[dict[str, tuple[float, float]]] = {"beta": (1e-2, 1e4)}
    PLAUSIBLE: ClassVar[dict[str, tuple[float, float]]] = {"beta": (2.0, 50.0)}

    alpha1: float = 1.0
    alpha2: float = 1.0
    alpha3: float = 0.0
    beta: float = 10.0

    def __post_init__(self):
        if not self.beta > 0:
            raise InvalidHyperparameter(f"soft-clip beta must be > 0, got {self.beta}")

    def evaluate(self, x) -> np.ndarray:
        v = self.alpha2 * _as_inputs(x) + self.alpha3
        bv = self.beta * v
        return (self.alpha1 / self.beta) * (_softplus(bv) - _softplus(bv - self.beta))


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SquaredExponentialKernel(_Parametrised):
    """k(xi, xj) = process_std^2 * exp(-(xi - xj)^2 / (2 length_scale^2))."""

    KIND: ClassVar[str] = "squared_exponential"
    POSITIVE: ClassVar[tuple[str, ...]] = ("process_std", "length_scale")
    BOUNDS: ClassVar[dict[str, tuple[float, float]]] = {
        "process_std": (1e-4, 1e2),
        "length_scale": (1e-3, 1e2),
    }
    PLAUSIBLE: ClassVar[dict[str, tuple[float, float]]] = {
        "process_std": (1e-2, 2.0),
        "length_scale": (5e-2, 5.0),
    }

    process_std: float = 1.0
    length_scale: float = 1.0

    def __post_init__(self):
        if not (self.process_std > 0 and self.length_scale > 0):
            raise InvalidHyperparameter(
                "squared-exponential kernel needs process_std > 0 and length_scale > 0"
            )

    def gram(self, x1, x2) -> np.ndarray:
        x1, x2 = _as_inputs(x1), _as_inputs(x2)
        sq_dist = (x1[:, None] - x2[None, :]) ** 2
        return self.process_std**2 * np.exp(-0.5 * sq_dist / self.length_scale**2)

    def diag(self, x) -> np.ndarray:
        return np.full_like(_as_inputs(x), self.process_std**2)


@dataclass(frozen=True)
class ConstantKernel(_Parametrised):
    """k(xi, xj) = level; a zero-gradient linear regression."""

    KIND: ClassVar[str] = "constant"
    POSITIVE: ClassVar[tuple[str, ...]] = ("level",)
    BOUNDS: ClassVar[dict[str, tuple[float, float]]] = {"level": (1e-8, 1e2)}
    PLAUSIBLE: ClassVar[dict[str, tuple[float, float]]] = {"level": (1e-4, 1.0)}

    level: float = 1.0

    def __post_init__(self):
        if not self.level >= 0:
            raise InvalidHyperparameter(f"constant kernel level must be >= 0, got {self.level}")

    def gram(self, x1, x2) -> np.ndarray:
        x1, x2 = _as_inputs(x1), _as_inputs(x2)
        return np.full((x1.size, x2.size), float(self.level))

    def diag(self, x) -> np.ndarray:
        return np.full_like(_as_inputs(x), float(self.level))


MeanSpec = Union[ZeroMean, ConstantMean, SoftClipMean]
KernelSpec = Union[SquaredExponentialKernel, ConstantKernel]

MEAN_KINDS: dict[str, type] = {cls.KIND: cls for cls in (ZeroMean, ConstantMean, SoftClipMean)}
KERNEL_KINDS: dict[str, type] = {
    cls.KIND: cls for cls in (SquaredExponentialKernel, ConstantKernel)
}


def mean_from_dict(data: dict) -> MeanSpec:
    """Rebuild a mean function from its ``to_dict`` form."""
    params = dict(data)
    kind = params.pop("kind")
    if kind not in MEAN_KINDS:
        raise KeyError(f"unknown mean kind '{kind}'. available: {list(MEAN_KINDS)}")
    return MEAN_KINDS[kind](**params)


def kernel_from_dict(data: dict) -> KernelSpec:
    """Rebuild a kernel from its ``to_dict`` form."""
    params = dict(data)
    kind = params.pop("kind")
    if kind not in KERNEL_KINDS:
        raise KeyError(f"unknown kernel kind '{kind}'. available: {list(KERNEL_KINDS)}")
    return KERNEL_KINDS[kind](**params)


# ---------------------------------------------------------------------------
# Functional forms
# ---------------------------------------------------------------------------


def soft_clip(x, params: SoftClipMean):
    """Evaluate the soft-clip mean at a scalar or array of wind speeds."""
    if not params.beta > 0:
        raise InvalidHyperparameter(f"soft-clip beta must be > 0, got {params.beta}")
    values = params.evaluate(x)
    return float(values[0]) if np.ndim(x) == 0 else values


def se_kernel(xi: float, xj: float, params: SquaredExponentialKernel) -> float:
    """Squared-exponential covariance between two scalar inputs."""
    return float(params.gram(xi, xj)[0, 0])


def constant_kernel(xi: float, xj: float, params: ConstantKernel) -> float:
    """Constant covariance; ignores its inputs."""
    return float(params.level)


def gram_matrix(x1, x2, kernel: KernelSpec) -> np.ndarray:
    """Matrix of pairwise kernel evaluations between two input vectors."""
    return kernel.gram(x1, x2)
