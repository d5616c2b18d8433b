"""Conditional mechanisms M(.|C): exact densities and rejection sampling.

Two cases are distinguished automatically:

- ``PositiveMass``: ``C`` is a polyhedron with ``P(f(D) + U in C) > 0``. The
  conditional density is the additive density restricted to ``C`` and divided
  by that probability.
- ``MeasureZero``: ``C`` contains an affine equality. The density lives on the
  free-coordinate chart of ``C`` and is divided by ``K_C``, the integral of the
  noise density over the parallel subspace. ``K_C`` depends only on ``C`` and
  the noise law, never on ``f(D)``.

Example:
    noise = NoiseSpec.laplace(1.0, 3)
    cond = conditional_density(np.zeros(3), noise, AffineEquality.sum_to(3))
    cond.normalizer            # 3/16
    cond.evaluate_free([0.5, -0.2])
"""

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, List, NamedTuple, Optional, Tuple

import numpy as np
from scipy import integrate

from cdp.core.errors import CDPError, ZeroMassError, check_length
from cdp.invariants.affine import (
    AffineEquality,
    AffineInequality,
    FreeParametrization,
    Invariant,
    contains,
    solve_free_parametrization,
    split_invariant,
)
from cdp.mechanisms.noise import (
    NoiseKind,
    NoiseSpec,
    log_density,
    log_kernel,
    log_prefactor,
    sample_additive,
    sample_noise,
)
from cdp.utils.rng import SeedLike, make_rng

MASS_FLOOR = 1e-12
MC_MASS_DRAWS = 10 ** 5
QUADRATURE_MAX_DIM = 4
IS_DRAWS = 2 * 10 ** 5
DEFAULT_MAX_TRIES = 10 ** 6


class InfeasibleInvariantError(CDPError, ValueError):
    """Raised when the query value itself lies outside an equality invariant."""


class QuadratureError(CDPError, RuntimeError):
    """Raised when adaptive quadrature cannot meet its tolerance."""


class AcceptanceTimeoutError(CDPError, RuntimeError):
    """Raised when rejection sampling exhausts its proposal budget."""

    def __init__(self, tries: int, accepted: int, wanted: int):
        self.tries = tries
        self.accepted = accepted
        self.wanted = wanted
        super().__init__(
            f"accepted {accepted}/{wanted} draws after {tries} proposals; "
            "the invariant has tiny probability, use the MCMC sampler instead"
        )


class DensityCase(Enum):
    POSITIVE_MASS = "positive_mass"
    MEASURE_ZERO = "measure_zero"


class NormalizerEstimate(NamedTuple):
    """Value of ``K_C`` (or ``P(C)``) with its standard error and method."""

    value: float
    stderr: float
    method: str


@dataclass(frozen=True, eq=False)
class ConditionalDensity:
    """Density of ``M(D) | C``.

    Attributes:
        fval: Query value ``f(D)``.
        noise: Law of the additive noise.
        constraint: The invariant ``C``.
        case: Which conditioning case applies.
        normalizer: ``P(C)`` for positive mass, ``K_C`` for measure zero.
        normalizer_stderr: Monte Carlo standard error (0 for exact values).
        method: How the normalizer was obtained.
        parametrization: Free-coordinate chart (measure-zero case only).
    """

    fval: np.ndarray
    noise: NoiseSpec
    constraint: Invariant
    case: DensityCase
    normalizer: float
    normalizer_stderr: float = 0.0
    method: str = "analytic"
    parametrization: Optional[FreeParametrization] = None

    def evaluate(self, z: Any) -> np.ndarray:
        """Density at ``z`` (one vector or an ``(N, n)`` batch); zero off ``C``.

        In the measure-zero case the value is the density on the free chart at
        the free coordinates of ``z``.
        """
        x = np.asarray(z, dtype=np.float64)
        inside = contains(self.constraint, x)
        logp = log_density(self.noise, x - self.fval)
        out = np.where(inside, np.exp(logp) / self.normalizer, 0.0)
        return out

    def evaluate_free(self, v: Any) -> np.ndarray:
        """Density at free-chart coordinates ``v``."""
        if self.parametrization is None:
            raise ValueError("free-chart evaluation needs an equality invariant")
        return self.evaluate(self.parametrization.solve(v))

    @property
    def dim(self) -> int:
        return self.noise.dim


def invariant_mass(
    fval: np.ndarray,
    noise: NoiseSpec,
    ineq: AffineInequality,
    seed: SeedLike = 0,
    draws: int = MC_MASS_DRAWS,
) -> NormalizerEstimate:
    """Probability that ``fval + U`` lands in the polyhedron ``ineq``.

    Coordinate halfspaces (and boxes) are handled exactly with the marginal
    CDF; anything else by Monte Carlo.
    """
    f = np.asarray(fval, dtype=np.float64)
    check_length(ineq.dim, noise.dim, "inequality system")
    if ineq.rows == 0:
        return NormalizerEstimate(1.0, 0.0, "analytic")
    bounds = ineq.coordinate_bounds()
    if bounds is not None:
        lower, upper = bounds
        if np.any(lower > upper):
            return NormalizerEstimate(0.0, 0.0, "analytic")
        marginal = noise.marginal()
        lo, hi = lower - f, upper - f
        per_coord = np.where(
            np.isinf(hi), marginal.sf(lo), marginal.cdf(hi) - marginal.cdf(lo)
        )
        return NormalizerEstimate(float(np.prod(np.clip(per_coord, 0.0, 1.0))), 0.0, "analytic")
    z = sample_additive(f, noise, seed, size=draws)
    hits = np.asarray(contains(ineq, z, tol=0.0), dtype=np.float64)
    p = float(hits.mean())
    return NormalizerEstimate(p, math.sqrt(max(p * (1.0 - p), 0.0) / draws), "monte_carlo")


def _unit_noise(noise: NoiseSpec) -> NoiseSpec:
    return NoiseSpec(noise.kind, 1.0, noise.dim)


def _kink_points(basis: np.ndarray, var: int) -> Callable[..., dict]:
    """nquad ``opts`` for variable ``var``: breakpoints where a coordinate vanishes.

    Only coordinates that do not depend on inner (already integrated)
    variables have a kink that is known from the outer values.
    """
    rows = [
        j for j in range(basis.shape[0])
        if basis[j, var] != 0.0 and not np.any(basis[j, :var])
    ]

    def opts(*outer: float) -> dict:
        points = {0.0}
        for j in rows:
            rest = sum(basis[j, var + 1 + i] * x for i, x in enumerate(outer))
            points.add(-rest / basis[j, var])
        return {"points": sorted(points), "limit": 200}

    return opts


def _quadrature_kernel_integral(noise: NoiseSpec, basis: np.ndarray) -> float:
    """Integral of the unit-scale noise kernel over ``span(basis)`` in chart coordinates."""
    k = basis.shape[1]
    unit = _unit_noise(noise)
    width = unit.tail_width()
    epsrel = 1e-6 if k <= 2 else 1e-4

    def integrand(*v: float) -> float:
        return float(np.exp(log_kernel(unit, basis @ np.asarray(v))))

    opts: List[Any] = []
    for var in range(k):
        kink = _kink_points(basis, var)

        def with_tol(*outer: float, _kink: Callable[..., dict] = kink) -> dict:
            o = _kink(*outer)
            o["points"] = [p for p in o["points"] if -width < p < width]
            o["epsrel"] = epsrel
            o["epsabs"] = 1e-13
            return o

        opts.append(with_tol)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, _ = integrate.nquad(integrand, [(-width, width)] * k, opts=opts)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"quadrature over {k} free coordinates failed: {exc}") from exc
    return float(value)


def _importance_kernel_integral(
    noise: NoiseSpec,
    param: FreeParametrization,
    seed: SeedLike,
    draws: int,
    accept: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> Tuple[float, float]:
    """Unit-scale kernel integral by sampling the free coordinates from the noise law.

    The free rows of the chart basis are the identity, so the weight is the
    product of the dependent-coordinate kernels times the per-coordinate
    normaliser of the free ones.
    """
    unit = _unit_noise(noise)
    k = param.free_dim
    t = sample_noise(unit.with_dim(k), seed, size=draws)
    u_dep = -t @ param.coupling.T
    log_w = log_kernel(unit, u_dep) - log_prefactor(unit, k)
    w = np.exp(log_w)
    if accept is not None:
        w = w * accept(t)
    return float(w.mean()), float(w.std(ddof=1) / math.sqrt(draws))


def estimate_normalizer(
    noise: NoiseSpec,
    eq: AffineEquality,
    normalized: bool = True,
    method: str = "auto",
    seed: SeedLike = 0,
    draws: int = IS_DRAWS,
) -> NormalizerEstimate:
    """``K_C``: integral of the noise density over ``{u : A u = 0}`` on the free chart.

    Args:
        noise: Additive noise law.
        eq: Equality invariant (only ``A`` matters).
        normalized: Include the density prefactor; ``False`` integrates the
            bare kernel ``exp(-|u|_1/lambda)`` (or its Gaussian analogue).
        method: ``auto``, ``closed_form`` (Gaussian only), ``quadrature`` or
            ``importance``. ``auto`` picks the closed form for Gaussian noise,
            quadrature up to four free coordinates and importance sampling
            above.
        seed: Seed for importance sampling.
        draws: Importance-sampling draws.

    Raises:
        QuadratureError: If quadrature misses its tolerance.
    """
    check_length(eq.dim, noise.dim, "equality system")
    param = solve_free_parametrization(eq).homogeneous()
    basis = param.basis()
    k = param.free_dim
    if method == "auto":
        if noise.kind is NoiseKind.GAUSSIAN:
            method = "closed_form"
        elif k <= QUADRATURE_MAX_DIM:
            method = "quadrature"
        else:
            method = "importance"

    stderr = 0.0
    if method == "closed_form":
        if noise.kind is not NoiseKind.GAUSSIAN:
            raise ValueError("closed-form K_C is only available for Gaussian noise")
        _, logdet = np.linalg.slogdet(basis.T @ basis)
        log_unit = 0.5 * k * math.log(2.0 * math.pi) - 0.5 * logdet
        unit_value = math.exp(log_unit)
    elif method == "quadrature":
        if k > QUADRATURE_MAX_DIM:
            raise QuadratureError(f"quadrature is limited to {QUADRATURE_MAX_DIM} free coordinates, got {k}")
        unit_value = _quadrature_kernel_integral(noise, basis)
    elif method == "importance":
        unit_value, stderr = _importance_kernel_integral(noise, param, seed, draws)
    else:
        raise ValueError(f"unknown normalizer method {method!r}")

    # scale out of the chart: v = scale * t
    log_scale = k * math.log(noise.scale)
    if normalized:
        log_scale += log_prefactor(noise)
    factor = math.exp(log_scale)
    return NormalizerEstimate(unit_value * factor, stderr * factor, method)


def normalizing_constant(
    noise: NoiseSpec,
    eq: AffineEquality,
    normalized: bool = True,
    method: str = "auto",
    seed: SeedLike = 0,
) -> float:
    """``K_C`` as a float; see ``estimate_normalizer``."""
    return estimate_normalizer(noise, eq, normalized=normalized, method=method, seed=seed).value


def _restricted_normalizer(
    fval: np.ndarray,
    noise: NoiseSpec,
    eq: AffineEquality,
    ineq: AffineInequality,
    seed: SeedLike,
    draws: int = IS_DRAWS,
) -> NormalizerEstimate:
    # an extra inequality makes the normaliser data-dependent
    param = solve_free_parametrization(eq).homogeneous()
    f = np.asarray(fval, dtype=np.float64)

    def accept(t: np.ndarray) -> np.ndarray:
        z = f + noise.scale * param.solve(t)
        return np.asarray(contains(ineq, z), dtype=np.float64)

    unit_value, stderr = _importance_kernel_integral(noise, param, seed, draws, accept)
    factor = math.exp(param.free_dim * math.log(noise.scale) + log_prefactor(noise))
    return NormalizerEstimate(unit_value * factor, stderr * factor, "importance")


def conditional_density(
    fval: Any,
    noise: NoiseSpec,
    inv: Invariant,
    seed: SeedLike = 0,
) -> ConditionalDensity:
    """Density of the conditional mechanism ``M(D) | C``.

    An equality part selects the measure-zero case, otherwise the
    positive-mass case applies.

    Raises:
        InfeasibleInvariantError: If ``fval`` violates an equality invariant.
        ZeroMassError: If the conditioning set has mass below ``1e-12``.
        DimensionMismatchError: On length mismatches.
    """
    f = np.asarray(fval, dtype=np.float64)
    check_length(f.shape[-1], noise.dim, "query value")
    check_length(inv.dim, noise.dim, "invariant")
    eq, ineq = split_invariant(inv)

    if eq is not None and eq.rows:
        if not contains(eq, f):
            raise InfeasibleInvariantError(
                f"query value violates the equality invariant (max residual "
                f"{float(np.abs(eq.residual(f)).max()):.3g})"
            )
        param = solve_free_parametrization(eq)
        estimate = estimate_normalizer(noise, eq, seed=seed)
        if ineq is not None and ineq.rows:
            restricted = _restricted_normalizer(f, noise, eq, ineq, seed)
            share = restricted.value / estimate.value
            if share < MASS_FLOOR:
                raise ZeroMassError(share, "inequality part has probability "
                                    f"{share:.3g} given the equality invariant")
            estimate = restricted
        return ConditionalDensity(
            f, noise, inv, DensityCase.MEASURE_ZERO,
            estimate.value, estimate.stderr, estimate.method, param,
        )

    if ineq is None:
        ineq = AffineInequality(np.zeros((0, noise.dim)), np.zeros(0))
    estimate = invariant_mass(f, noise, ineq, seed)
    if estimate.value < MASS_FLOOR:
        raise ZeroMassError(estimate.value)
    return ConditionalDensity(
        f, noise, inv, DensityCase.POSITIVE_MASS,
        estimate.value, estimate.stderr, estimate.method,
    )


class RejectionSampler:
    """Exact sampler for ``M(D) | C`` when ``C`` has positive probability.

    Counts every proposal and every proposal that fell in ``C`` so the
    acceptance frequency estimates ``P(C)``.
    """

    def __init__(
        self,
        fval: Any,
        noise: NoiseSpec,
        inv: Invariant,
        max_tries: int = DEFAULT_MAX_TRIES,
    ):
        eq, ineq = split_invariant(inv)
        if eq is not None and eq.rows:
            raise ZeroMassError(0.0, "equality invariants have probability zero; use the MCMC sampler")
        self.fval = np.asarray(fval, dtype=np.float64)
        check_length(self.fval.shape[-1], noise.dim, "query value")
        self.noise = noise
        self.inv = inv
        self.max_tries = int(max_tries)
        self.proposed = 0
        self.accepted = 0

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else float("nan")

    def draw(self, seed: SeedLike, size: Optional[int] = None) -> np.ndarray:
        """One accepted draw (``size=None``) or an ``(size, n)`` batch.

        Proposals are generated in chunks but consumed in stream order, so
        the first accepted proposal is the one returned.

        Raises:
            AcceptanceTimeoutError: After ``max_tries`` proposals per wanted draw.
        """
        rng = make_rng(seed)
        wanted = 1 if size is None else int(size)
        budget = self.max_tries * wanted
        kept: List[np.ndarray] = []
        got = 0
        tries = 0
        rate = 0.5
        while got < wanted:
            if tries >= budget:
                raise AcceptanceTimeoutError(tries, got, wanted)
            need = wanted - got
            chunk = int(min(budget - tries, max(64, need / max(rate, 1e-3) * 1.2), 2 ** 20))
            z = sample_additive(self.fval, self.noise, rng, size=chunk)
            inside = np.asarray(contains(self.inv, z, tol=0.0))
            hits = z[inside]
            tries += chunk
            self.proposed += chunk
            self.accepted += int(inside.sum())
            kept.append(hits[:need])
            got += min(need, hits.shape[0])
            rate = max(self.accepted / self.proposed, 1e-6)
        out = np.concatenate(kept, axis=0)
        return out[0] if size is None else out


def rejection_sample(
    fval: Any,
    noise: NoiseSpec,
    inv: Invariant,
    seed: SeedLike,
    max_tries: int = DEFAULT_MAX_TRIES,
    size: Optional[int] = None,
) -> np.ndarray:
    """Sample ``M(D) | C`` by redrawing the unconstrained mechanism until it lands in ``C``.

    Raises:
        AcceptanceTimeoutError: If ``max_tries`` proposals per draw are rejected.
        ZeroMassError: For equality invariants.
    """
    return RejectionSampler(fval, noise, inv, max_tries).draw(seed, size)
