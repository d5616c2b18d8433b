"""Density-ratio privacy audits and distribution distances.

``privacy_audit`` checks ``|log d1(v) - log d2(v)| <= epsilon`` on a grid for
two densities of neighbouring query values. ``empirical_audit`` does the same
on samples, with histogram densities on Freedman-Diaconis bins and a three
standard-error allowance per bin.
"""

import math
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, special

from cdp.belief.finite import FiniteBeliefState
from cdp.core.errors import CDPError
from cdp.invariants.affine import FreeParametrization

ANALYTIC_SLACK = 1e-6
EMPIRICAL_SE = 3.0
MIN_BIN_COUNT = 50

DensityEval = Callable[[np.ndarray], Any]


class SupportMismatchError(CDPError, ValueError):
    """Raised when exactly one of two audited densities vanishes at a grid point."""

    def __init__(self, point: np.ndarray):
        self.point = np.asarray(point)
        super().__init__(f"densities disagree on support at {self.point.tolist()}")


class AbsoluteContinuityError(CDPError, ValueError):
    """Raised when KL(q || p) is infinite because q charges a p-null world."""


@dataclass(frozen=True)
class AuditReport:
    """Outcome of a density-ratio audit.

    Attributes:
        max_log_ratio: Largest absolute log ratio observed.
        epsilon_target: The claimed epsilon.
        grid_spec: Description of the evaluation points.
        passed: Whether the ratio stayed within ``epsilon_target`` plus slack.
        margin: ``epsilon_target + slack - max_log_ratio`` (negative on failure).
        slack: Numerical or statistical allowance used.
    """

    max_log_ratio: float
    epsilon_target: float
    grid_spec: str
    passed: bool
    margin: float
    slack: float = ANALYTIC_SLACK

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def privacy_audit(
    d1: DensityEval,
    d2: DensityEval,
    epsilon: float,
    grid: Any,
    grid_spec: Optional[str] = None,
    slack: float = ANALYTIC_SLACK,
) -> AuditReport:
    """Largest ``|log(d1/d2)|`` over ``grid`` compared to ``epsilon``.

    Points where both densities vanish are ignored.

    Raises:
        SupportMismatchError: Where exactly one density is zero.
    """
    points = np.asarray(grid, dtype=np.float64)
    p1 = np.asarray(d1(points), dtype=np.float64).reshape(-1)
    p2 = np.asarray(d2(points), dtype=np.float64).reshape(-1)
    zero1, zero2 = p1 <= 0.0, p2 <= 0.0
    mismatch = zero1 ^ zero2
    if mismatch.any():
        flat = points.reshape(p1.shape[0], -1)
        raise SupportMismatchError(flat[int(np.argmax(mismatch))])
    both = ~(zero1 | zero2)
    if not both.any():
        raise SupportMismatchError(points.reshape(p1.shape[0], -1)[0])
    worst = float(np.abs(np.log(p1[both]) - np.log(p2[both])).max())
    return AuditReport(
        max_log_ratio=worst,
        epsilon_target=float(epsilon),
        grid_spec=grid_spec or f"{int(both.sum())} grid points",
        passed=worst <= epsilon + slack,
        margin=float(epsilon + slack - worst),
        slack=slack,
    )


def line_grid(lower: float, upper: float, points: int = 2001) -> np.ndarray:
    """``(points, 1)`` grid on an interval, for one-dimensional densities."""
    return np.linspace(lower, upper, points)[:, np.newaxis]


def chart_grid(
    param: FreeParametrization,
    center: Any,
    half_width: float,
    points: int = 41,
) -> np.ndarray:
    """Points of ``{A z = b}`` on a regular grid in the free coordinates around ``center``."""
    c = param.free_part(center)
    axes = [np.linspace(ci - half_width, ci + half_width, points) for ci in np.atleast_1d(c)]
    mesh = np.meshgrid(*axes, indexing="ij")
    free = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    return param.solve(free)


def empirical_audit(
    x1: Any,
    x2: Any,
    epsilon: float,
    bins: Any = "fd",
    min_count: int = MIN_BIN_COUNT,
) -> AuditReport:
    """Histogram audit of two one-dimensional samples.

    Bins where either sample has fewer than ``min_count`` points are skipped.
    A bin fails when ``|log ratio| - 3 * se > epsilon`` with the delta-method
    standard error of the log ratio of two binomial proportions.
    """
    a = np.asarray(x1, dtype=np.float64).reshape(-1)
    b = np.asarray(x2, dtype=np.float64).reshape(-1)
    edges = np.histogram_bin_edges(np.concatenate([a, b]), bins=bins)
    c1, _ = np.histogram(a, edges)
    c2, _ = np.histogram(b, edges)
    keep = (c1 >= min_count) & (c2 >= min_count)
    if not keep.any():
        raise ValueError("no histogram bin has enough samples from both releases")
    k1, k2 = c1[keep].astype(float), c2[keep].astype(float)
    log_ratio = np.abs(np.log(k1 / a.size) - np.log(k2 / b.size))
    se = np.sqrt(1.0 / k1 - 1.0 / a.size + 1.0 / k2 - 1.0 / b.size)
    excess = log_ratio - EMPIRICAL_SE * se
    worst = int(np.argmax(excess))
    return AuditReport(
        max_log_ratio=float(log_ratio.max()),
        epsilon_target=float(epsilon),
        grid_spec=f"{int(keep.sum())}/{edges.size - 1} histogram bins ({bins})",
        passed=bool(excess.max() <= epsilon),
        margin=float(epsilon - excess[worst]),
        slack=float(EMPIRICAL_SE * se[worst]),
    )


def _common_edges(samples: Sequence[np.ndarray], bins: Any, value_range: Optional[Tuple[float, float]]) -> np.ndarray:
    pooled = np.concatenate([np.asarray(s, dtype=np.float64).reshape(-1) for s in samples])
    return np.histogram_bin_edges(pooled, bins=bins, range=value_range)


def tv_distance(
    x: Any,
    y: Any,
    bins: Any = 30,
    value_range: Optional[Tuple[float, float]] = None,
) -> float:
    """Total-variation distance between the histograms of two 1-D samples on shared bins."""
    edges = _common_edges([x, y], bins, value_range)
    p, _ = np.histogram(np.asarray(x).reshape(-1), edges)
    q, _ = np.histogram(np.asarray(y).reshape(-1), edges)
    return 0.5 * float(np.abs(p / p.sum() - q / q.sum()).sum())


def binned_probabilities(pdf: Callable[[float], float], edges: Any) -> np.ndarray:
    """Mass of a 1-D density in each bin, by adaptive quadrature."""
    e = np.asarray(edges, dtype=np.float64)
    return np.array(
        [integrate.quad(pdf, lo, hi, epsabs=1e-13, limit=200)[0] for lo, hi in zip(e[:-1], e[1:])]
    )


def tv_to_density(
    x: Any,
    pdf: Callable[[float], float],
    bins: int = 30,
    value_range: Optional[Tuple[float, float]] = None,
) -> float:
    """Total-variation distance between a sample histogram and a density binned the same way.

    Both are restricted to the histogram range and renormalised there.
    """
    sample = np.asarray(x, dtype=np.float64).reshape(-1)
    edges = np.histogram_bin_edges(sample, bins=bins, range=value_range)
    counts, _ = np.histogram(sample, edges)
    mass = binned_probabilities(pdf, edges)
    return 0.5 * float(np.abs(counts / counts.sum() - mass / mass.sum()).sum())


def kl_divergence(q: FiniteBeliefState, p: FiniteBeliefState) -> float:
    """``sum q log(q / p)`` with ``0 log 0 = 0``.

    Raises:
        AbsoluteContinuityError: If ``q`` puts mass where ``p`` has none.
        ValueError: If the states have different world lists.
    """
    if q.worlds != p.worlds:
        raise ValueError("KL divergence needs states over the same world list")
    terms = special.rel_entr(q.probs, p.probs)
    if not np.all(np.isfinite(terms)):
        bad = [w for w, t in zip(q.worlds, terms) if not math.isfinite(t)]
        raise AbsoluteContinuityError(f"q charges worlds with p = 0: {bad}")
    return float(max(terms.sum(), 0.0))
