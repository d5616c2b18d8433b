"""Additive Laplace and Gaussian mechanisms.

A mechanism releases ``f(D) + U`` where ``U`` has i.i.d. Laplace or Gaussian
coordinates. ``NoiseSpec`` describes the law of ``U``; everything here is a
pure function of its arguments and an explicit seed.

Example:
    lam = calibrate_laplace(delta1=1.0, epsilon=0.5)        # 2.0
    noise = NoiseSpec(NoiseKind.LAPLACE, scale=lam, dim=3)
    release = sample_additive(np.array([10.0, 4.0, 6.0]), noise, seed=7)
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Union

import numpy as np
from scipy import stats

from cdp.core.errors import CDPError, InvalidBudgetError, InvalidScaleError, check_length
from cdp.utils.rng import SeedLike, make_rng

ArrayLike = Union[np.ndarray, list, tuple]


class InvalidSensitivityError(CDPError, ValueError):
    """Raised when a query sensitivity is not positive."""


class NoiseKind(Enum):
    """Law of each noise coordinate."""
    LAPLACE = "laplace"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class PrivacyParams:
    """An (epsilon, delta) budget.

    Attributes:
        epsilon: Multiplicative bound, strictly positive.
        delta: Additive slack in [0, 1).
    """

    epsilon: float
    delta: float = 0.0

    def __post_init__(self) -> None:
        if not self.epsilon > 0 or not math.isfinite(self.epsilon):
            raise InvalidBudgetError(f"epsilon must be positive, got {self.epsilon}")
        if not 0 <= self.delta < 1:
            raise InvalidBudgetError(f"delta must lie in [0, 1), got {self.delta}")


@dataclass(frozen=True)
class NoiseSpec:
    """I.i.d. additive noise on ``dim`` coordinates.

    Attributes:
        kind: Laplace or Gaussian.
        scale: Laplace scale (lambda) or Gaussian standard deviation (sigma).
        dim: Number of coordinates.
    """

    kind: NoiseKind
    scale: float
    dim: int

    def __post_init__(self) -> None:
        if not self.scale > 0 or not math.isfinite(self.scale):
            raise InvalidScaleError(f"noise scale must be positive, got {self.scale}")
        if self.dim < 1:
            raise InvalidScaleError(f"noise dimension must be >= 1, got {self.dim}")

    @classmethod
    def laplace(cls, scale: float, dim: int) -> "NoiseSpec":
        return cls(NoiseKind.LAPLACE, float(scale), int(dim))

    @classmethod
    def gaussian(cls, scale: float, dim: int) -> "NoiseSpec":
        return cls(NoiseKind.GAUSSIAN, float(scale), int(dim))

    def with_dim(self, dim: int) -> "NoiseSpec":
        return NoiseSpec(self.kind, self.scale, dim)

    @property
    def coordinate_variance(self) -> float:
        if self.kind is NoiseKind.LAPLACE:
            return 2.0 * self.scale ** 2
        return self.scale ** 2

    def marginal(self) -> "stats.rv_continuous":
        """Frozen scipy distribution of a single noise coordinate."""
        if self.kind is NoiseKind.LAPLACE:
            return stats.laplace(loc=0.0, scale=self.scale)
        return stats.norm(loc=0.0, scale=self.scale)

    def tail_width(self) -> float:
        """Half-width outside which a coordinate's density is negligible (< 1e-20 relative)."""
        if self.kind is NoiseKind.LAPLACE:
            return 50.0 * self.scale
        return 10.0 * self.scale


@dataclass(frozen=True)
class QuerySpec:
    """A numeric query with its sensitivities.

    Attributes:
        dim: Output length.
        l1_sensitivity: Maximum L1 change between neighbouring datasets.
        l2_sensitivity: Maximum L2 change between neighbouring datasets.
        eval: Maps a dataset to its query vector.
    """

    dim: int
    l1_sensitivity: float
    l2_sensitivity: float
    eval: Optional[Callable[[object], np.ndarray]] = None

    def __post_init__(self) -> None:
        if self.l1_sensitivity < 0 or self.l2_sensitivity < 0:
            raise InvalidSensitivityError("sensitivities must be nonnegative")

    @classmethod
    def counting(cls, dim: int, eval: Optional[Callable[[object], np.ndarray]] = None) -> "QuerySpec":
        """Histogram / counting query: neighbours differ on at most one record."""
        return cls(dim=dim, l1_sensitivity=1.0, l2_sensitivity=1.0, eval=eval)

    def __call__(self, dataset: object) -> np.ndarray:
        if self.eval is None:
            raise ValueError("query has no evaluation function")
        out = np.asarray(self.eval(dataset), dtype=np.float64)
        check_length(out.shape[-1], self.dim, "query output")
        return out


def calibrate_laplace(delta1: float, epsilon: float) -> float:
    """Laplace scale lambda = delta1 / epsilon for epsilon-DP.

    Raises:
        InvalidSensitivityError: If ``delta1 <= 0``.
        InvalidBudgetError: If ``epsilon <= 0``.
    """
    if not delta1 > 0:
        raise InvalidSensitivityError(f"L1 sensitivity must be positive, got {delta1}")
    if not epsilon > 0:
        raise InvalidBudgetError(f"epsilon must be positive, got {epsilon}")
    return delta1 / epsilon


def calibrate_gaussian(delta2: float, params: PrivacyParams, classical: bool = False) -> float:
    """Gaussian standard deviation for (epsilon, delta)-DP.

    The default rule is ``sigma = delta2 * (1 + sqrt(1 + ln(1/delta))) / epsilon``.
    ``classical=True`` returns ``delta2 * sqrt(2 ln(1.25/delta)) / epsilon``
    for comparison.

    Raises:
        InvalidSensitivityError: If ``delta2 <= 0``.
        InvalidBudgetError: If delta is not in (0, 1).
    """
    if not delta2 > 0:
        raise InvalidSensitivityError(f"L2 sensitivity must be positive, got {delta2}")
    if not 0 < params.delta < 1:
        raise InvalidBudgetError(f"Gaussian calibration needs 0 < delta < 1, got {params.delta}")
    if classical:
        return delta2 * math.sqrt(2.0 * math.log(1.25 / params.delta)) / params.epsilon
    return delta2 * (1.0 + math.sqrt(1.0 + math.log(1.0 / params.delta))) / params.epsilon


def sample_noise(noise: NoiseSpec, seed: SeedLike, size: Optional[int] = None) -> np.ndarray:
    """Draw noise vectors; shape ``(dim,)`` or ``(size, dim)``.

    Laplace coordinates use the inverse CDF of one uniform each, so a given
    seed maps to the same noise whatever the query value.
    """
    rng = make_rng(seed)
    shape = (noise.dim,) if size is None else (int(size), noise.dim)
    if noise.kind is NoiseKind.LAPLACE:
        # keep u away from -1/2 so log1p never sees -1
        u = np.maximum(rng.random(shape) - 0.5, np.nextafter(-0.5, 0.0))
        return -noise.scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))
    return noise.scale * rng.standard_normal(shape)


def sample_additive(
    fval: ArrayLike,
    noise: NoiseSpec,
    seed: SeedLike,
    size: Optional[int] = None,
) -> np.ndarray:
    """Release ``fval + U`` with ``U`` drawn from ``noise``.

    Raises:
        DimensionMismatchError: If ``len(fval) != noise.dim``.
    """
    f = np.asarray(fval, dtype=np.float64)
    check_length(f.shape[-1], noise.dim, "query value")
    return f + sample_noise(noise, seed, size)


def log_density(noise: NoiseSpec, u: ArrayLike) -> np.ndarray:
    """Log density of noise vectors ``u`` (last axis is the coordinate axis).

    Raises:
        DimensionMismatchError: If the last axis has the wrong length.
    """
    x = np.asarray(u, dtype=np.float64)
    check_length(x.shape[-1], noise.dim, "noise vector")
    lam = noise.scale
    if noise.kind is NoiseKind.LAPLACE:
        return -noise.dim * math.log(2.0 * lam) - np.abs(x).sum(axis=-1) / lam
    return (
        -0.5 * noise.dim * math.log(2.0 * math.pi * lam ** 2)
        - 0.5 * np.square(x).sum(axis=-1) / lam ** 2
    )


def log_kernel(noise: NoiseSpec, u: np.ndarray) -> np.ndarray:
    """Log density without the normalising prefactor (``-|u|_1/lambda`` or ``-|u|^2/2sigma^2``)."""
    if noise.kind is NoiseKind.LAPLACE:
        return -np.abs(u).sum(axis=-1) / noise.scale
    return -0.5 * np.square(u).sum(axis=-1) / noise.scale ** 2


def log_prefactor(noise: NoiseSpec, dim: Optional[int] = None) -> float:
    n = noise.dim if dim is None else dim
    if noise.kind is NoiseKind.LAPLACE:
        return -n * math.log(2.0 * noise.scale)
    return -0.5 * n * math.log(2.0 * math.pi * noise.scale ** 2)


def density(noise: NoiseSpec, u: ArrayLike) -> Union[float, np.ndarray]:
    """Density of the noise vector ``u``: the product of per-coordinate densities."""
    out = np.exp(log_density(noise, u))
    return float(out) if np.ndim(out) == 0 else out


def gaussian_delta_on_grid(
    sigma: float,
    delta2: float,
    epsilon: float,
    half_width: float = 40.0,
    points: int = 200_001,
) -> float:
    """Smallest delta such that the 1-D Gaussian pair N(0, s^2), N(delta2, s^2) is (epsilon, delta)-close.

    Computes ``sum max(0, p(x) - e^eps q(x)) dx`` on a uniform grid, the
    hockey-stick divergence in the worst direction.
    """
    x = np.linspace(-half_width * sigma, half_width * sigma + delta2, points)
    dx = x[1] - x[0]
    p = stats.norm.pdf(x, loc=0.0, scale=sigma)
    q = stats.norm.pdf(x, loc=delta2, scale=sigma)
    forward = np.clip(p - math.exp(epsilon) * q, 0.0, None).sum() * dx
    backward = np.clip(q - math.exp(epsilon) * p, 0.0, None).sum() * dx
    return float(max(forward, backward))
