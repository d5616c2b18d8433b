"""Closed-form reference values for conditioning and imaging.

For Laplace noise on three coordinates constrained to sum to zero, the
conditional law of one coordinate has density
``h(u) = (lam + |u|) exp(-2|u|/lam) / (1.5 lam^2)`` and variance ``5 lam^2 / 6``.
Projecting i.i.d. Laplace noise onto a sum constraint in ``n`` coordinates
leaves per-coordinate variance ``2 lam^2 (1 - 1/n)``.
"""

import math
from typing import Any, Callable, List, Sequence

import numpy as np
from scipy import integrate

from cdp.core.errors import InvalidScaleError
from cdp.revision.conditional import ConditionalDensity


def _check_scale(lam: float) -> None:
    if not lam > 0 or not math.isfinite(lam):
        raise InvalidScaleError(f"noise scale must be positive, got {lam}")


def analytic_conditioned_variance_n3(lam: float) -> float:
    """Per-coordinate variance ``5 lam^2 / 6`` of Laplace noise conditioned on a three-way zero sum.

    Raises:
        InvalidScaleError: If ``lam`` is not a positive finite number.
    """
    _check_scale(lam)
    return 5.0 * lam ** 2 / 6.0


def analytic_imaging_variance(lam: float, n: int) -> float:
    """Per-coordinate variance ``2 lam^2 (1 - 1/n)`` of Laplace noise projected onto a sum constraint.

    Only the second moment of the noise enters, so the value holds for any
    constant on the right-hand side of the constraint.

    Raises:
        InvalidScaleError: If ``lam`` is not positive or ``n < 2``.
    """
    _check_scale(lam)
    if n < 2:
        raise InvalidScaleError(f"imaging variance needs n >= 2 coordinates, got {n}")
    return 2.0 * lam ** 2 * (1.0 - 1.0 / n)


def unconstrained_laplace_variance(lam: float) -> float:
    """``2 lam^2``."""
    _check_scale(lam)
    return 2.0 * lam ** 2


def conditioned_marginal_n3(u: Any, lam: float) -> np.ndarray:
    """Marginal density of one noise coordinate under the three-way sum-zero constraint."""
    _check_scale(lam)
    a = np.abs(np.asarray(u, dtype=np.float64))
    return (lam + a) * np.exp(-2.0 * a / lam) / (1.5 * lam ** 2)


def marginal_moment_quadrature(pdf: Callable[[float], float], order: int = 2) -> float:
    """``int u^order pdf(u) du`` over the real line, split at the kink at zero."""

    def integrand(u: float) -> float:
        return float(u ** order * pdf(u))

    left, _ = integrate.quad(integrand, -np.inf, 0.0, epsabs=1e-13, epsrel=1e-10, limit=200)
    right, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=1e-13, epsrel=1e-10, limit=200)
    return left + right


def conditioned_variance_n3_quadrature(lam: float) -> float:
    """Variance of one coordinate computed by integrating ``h``."""
    return marginal_moment_quadrature(lambda u: float(conditioned_marginal_n3(u, lam)), order=2)


def _kinks(cond: ConditionalDensity, x: float) -> List[float]:
    # values of the second free coordinate where some noise coordinate vanishes
    param = cond.parametrization
    assert param is not None
    basis = param.homogeneous().basis()
    fa, fb = param.free_part(cond.fval)
    points = []
    for row in basis:
        if row[1] != 0.0:
            points.append(float(fb - row[0] * (x - fa) / row[1]))
    return sorted(set(points))


def free_marginal_quadrature(cond: ConditionalDensity, xs: Sequence[float]) -> np.ndarray:
    """Marginal density of the first free coordinate for a two-dimensional chart.

    Integrates ``cond.evaluate_free`` over the second free coordinate for each
    value in ``xs``.
    The integration window is four tail widths around the query value and is
    split where a noise coordinate changes sign.

    Raises:
        ValueError: If ``cond`` has no two-dimensional free chart.
    """
    param = cond.parametrization
    if param is None or param.free_dim != 2:
        raise ValueError("free_marginal_quadrature needs a measure-zero density with two free coordinates")
    width = cond.noise.tail_width()
    center = float(param.free_part(cond.fval)[1])
    out = np.empty(len(xs))
    for i, x in enumerate(xs):

        def g(t: float, x: float = float(x)) -> float:
            return float(cond.evaluate_free([x, t]))

        lo, hi = center - 2 * width, center + 2 * width
        points = [p for p in _kinks(cond, float(x)) if lo < p < hi]
        out[i], _ = integrate.quad(g, lo, hi, points=points or None, limit=400, epsabs=1e-14)
    return out
