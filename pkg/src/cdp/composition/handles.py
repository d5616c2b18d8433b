"""Mechanisms as first-class values and the operators that combine them.

A ``MechanismHandle`` wraps a sampler ``(fval, seed, size) -> release`` with
its privacy budget and, when known, its density and invariant. Operators
return new handles; nothing is mutated and every sampler takes an explicit
seed, so handles can be shared between threads.

Example:
    noise = NoiseSpec.laplace(2.0, 3)
    base = additive_handle(noise, PrivacyParams(0.5))
    cond = conditioned_handle(noise, AffineEquality.sum_to(3, 12.0), PrivacyParams(0.5))
    joint = compose_basic([base, cond])      # epsilon 1.0, dim 6
    joint.sample(np.r_[x, x], seed=3)
"""

from dataclasses import dataclass
from typing import Any, Callable, NamedTuple, Optional, Protocol, Sequence, runtime_checkable

import numpy as np

from cdp.core.errors import WeightError, ZeroMassError, check_length
from cdp.invariants.affine import Invariant, contains, product_invariant, split_invariant
from cdp.mechanisms.noise import NoiseSpec, PrivacyParams, density, sample_additive
from cdp.revision.conditional import (
    MASS_FLOOR,
    MC_MASS_DRAWS,
    conditional_density,
    invariant_mass,
    rejection_sample,
)
from cdp.revision.mh import MHConfig, sample_conditional
from cdp.update.projection import Projector
from cdp.utils.rng import SeedLike, make_rng, spawn_seeds

WEIGHT_TOL = 1e-9


@runtime_checkable
class Sampler(Protocol):
    """Draws releases for a query value.

    Returns shape ``(dim,)`` when ``size`` is ``None``, else ``(size, dim)``.
    """

    def __call__(self, fval: np.ndarray, seed: SeedLike, size: Optional[int] = None) -> np.ndarray:
        ...


DensityFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class MechanismHandle:
    """A privacy mechanism.

    Attributes:
        sampler: Draws releases for a query value.
        budget: The (epsilon, delta) guarantee, tracked as metadata.
        dim: Length of the query value and of a release.
        invariant: Set every release lies in, if any.
        density: ``(fval, z) -> density of z``, if available.
        noise: Additive noise law of the underlying mechanism, if any.
        name: Display label.
    """

    sampler: Sampler
    budget: PrivacyParams
    dim: int
    invariant: Optional[Invariant] = None
    density: Optional[DensityFn] = None
    noise: Optional[NoiseSpec] = None
    name: str = "mechanism"
    out_dim: Optional[int] = None

    def sample(self, fval: Any, seed: SeedLike, size: Optional[int] = None) -> np.ndarray:
        f = np.asarray(fval, dtype=np.float64)
        check_length(f.shape[-1], self.dim, "query value")
        return self.sampler(f, seed, size)

    @property
    def output_dim(self) -> int:
        return self.dim if self.out_dim is None else self.out_dim


def additive_handle(noise: NoiseSpec, budget: PrivacyParams) -> MechanismHandle:
    """The unconstrained mechanism ``f(D) + U``."""

    def sampler(fval: np.ndarray, seed: SeedLike, size: Optional[int] = None) -> np.ndarray:
        return sample_additive(fval, noise, seed, size)

    def dens(fval: np.ndarray, z: np.ndarray) -> np.ndarray:
        return np.asarray(density(noise, np.asarray(z) - fval))

    return MechanismHandle(sampler, budget, noise.dim, None, dens, noise, name=f"{noise.kind.value}")


def conditioned_handle(
    noise: NoiseSpec,
    inv: Invariant,
    budget: PrivacyParams,
    cfg: Optional[MHConfig] = None,
) -> MechanismHandle:
    """The conditional mechanism ``M(.|C)``; keeps the budget of ``M`` for data-independent ``C``."""

    def sampler(fval: np.ndarray, seed: SeedLike, size: Optional[int] = None) -> np.ndarray:
        return sample_conditional(fval, noise, inv, seed, size=size, cfg=cfg)

    def dens(fval: np.ndarray, z: np.ndarray) -> np.ndarray:
        return conditional_density(fval, noise, inv).evaluate(z)

    return MechanismHandle(sampler, budget, noise.dim, inv, dens, noise, name="conditioned")


def imaged_handle(noise: NoiseSpec, inv: Invariant, budget: PrivacyParams) -> MechanismHandle:
    """The imaged mechanism ``M_C``: a post-processing of ``M``."""
    return postprocess(
        additive_handle(noise, budget), Projector(inv), invariant=inv, name="imaged"
    )


def compose_basic(ms: Sequence[MechanismHandle]) -> MechanismHandle:
    """Joint mechanism ``(M_1, ..., M_k)`` on the concatenated query value.

    Each component gets its own child seed; the budget is the sum of the
    component budgets and the invariant is the product of theirs.
    """
    if not ms:
        raise ValueError("compose_basic needs at least one mechanism")
    if len(ms) == 1:
        return ms[0]
    dims = [m.dim for m in ms]
    cuts = np.cumsum(dims)[:-1]
    epsilon = sum(m.budget.epsilon for m in ms)
    delta = sum(m.budget.delta for m in ms)

    def sampler(fval: np.ndarray, seed: SeedLike, size: Optional[int] = None) -> np.ndarray:
        parts = np.split(fval, cuts, axis=-1)
        seeds = spawn_seeds(seed, len(ms))
        return np.concatenate(
            [m.sample(p, s, size) for m, p, s in zip(ms, parts, seeds)], axis=-1
        )

    dens: Optional[DensityFn] = None
    if all(m.density is not None for m in ms):

        def dens(fval: np.ndarray, z: np.ndarray) -> np.ndarray:
            fs = np.split(np.asarray(fval), cuts, axis=-1)
            zs = np.split(np.asarray(z), cuts, axis=-1)
            out = np.ones(np.asarray(z).shape[:-1])
            for m, f_i, z_i in zip(ms, fs, zs):
                out = out * m.density(f_i, z_i)  # type: ignore[misc]
            return out

    return MechanismHandle(
        sampler,
        PrivacyParams(epsilon, delta),
        int(sum(dims)),
        product_invariant([m.invariant for m in ms], dims),
        dens,
        None,
        name="(" + ", ".join(m.name for m in ms) + ")",
    )


class UnionSample(NamedTuple):
    """Draws from ``M(D | C u C')`` with the mixing weight used.

    ``weight`` is ``P(C) / (P(C) + P(C'))`` for the query value at hand.
    """

    values: np.ndarray
    weight: float
    weight_stderr: float


def disjoint_union_sampler(
    m: MechanismHandle,
    fval: Any,
    C: Invariant,
    C2: Invariant,
    seed: SeedLike,
    size: Optional[int] = None,
    draws: int = MC_MASS_DRAWS,
) -> UnionSample:
    """Sample ``M(D | C u C2)`` as the convex combination of ``M(D|C)`` and ``M(D|C2)``.

    The weight is computed exactly for coordinate halfspaces and by Monte
    Carlo otherwise; it depends on ``fval``.

    Raises:
        ZeroMassError: If ``P(C) + P(C2) < 1e-12``.
        ValueError: If ``m`` has no additive noise law or a draw from ``C``
            also lies in ``C2``.
    """
    if m.noise is None:
        raise ValueError("disjoint-union sampling needs a mechanism with an additive noise law")
    f = np.asarray(fval, dtype=np.float64)
    check_length(f.shape[-1], m.dim, "query value")
    mass_seed, c_seed, c2_seed, coin_seed = spawn_seeds(seed, 4)
    masses = []
    for inv in (C, C2):
        eq, ineq = split_invariant(inv)
        if eq is not None and eq.rows:
            masses.append((0.0, 0.0))
            continue
        assert ineq is not None
        est = invariant_mass(f, m.noise, ineq, mass_seed, draws)
        masses.append((est.value, est.stderr))
    (p1, s1), (p2, s2) = masses
    total = p1 + p2
    if total < MASS_FLOOR:
        raise ZeroMassError(total, f"P(C) + P(C') = {total:.3g} is numerically zero")
    weight = p1 / total
    # delta method on p1 / (p1 + p2)
    weight_stderr = float(np.hypot(p2 * s1, p1 * s2) / total ** 2)

    wanted = 1 if size is None else int(size)
    from_c = make_rng(coin_seed).random(wanted) < weight
    out = np.empty((wanted, m.dim))
    n1 = int(from_c.sum())
    if n1:
        out[from_c] = rejection_sample(f, m.noise, C, c_seed, size=n1)
        overlap = np.asarray(contains(C2, out[from_c], tol=0.0))
        if overlap.any():
            raise ValueError("invariants are not disjoint: a draw from C also lies in C'")
    if wanted - n1:
        out[~from_c] = rejection_sample(f, m.noise, C2, c2_seed, size=wanted - n1)
    values = out[0] if size is None else out
    return UnionSample(values, weight, weight_stderr)


def mixture_mechanism(ms: Sequence[MechanismHandle], weights: Sequence[float]) -> MechanismHandle:
    """Draw component ``i`` with probability ``weights[i]``, then sample it.

    The mixture carries the largest component epsilon and delta. The handle
    holds no seed of its own: each sampling call splits its seed into one
    stream for the component picks and one per component, so equal seeds give
    equal picks and equal draws.

    Raises:
        WeightError: If weights are negative, mis-sized or do not sum to one.
    """
    w = np.asarray(weights, dtype=np.float64)
    if not ms or w.shape != (len(ms),):
        raise WeightError(list(w), "need exactly one weight per mechanism")
    if np.any(w < 0) or abs(w.sum() - 1.0) > WEIGHT_TOL:
        raise WeightError(list(w))
    if len(ms) == 1:
        return ms[0]
    dims = {m.dim for m in ms}
    if len(dims) != 1:
        raise ValueError(f"mixture components must share one dimension, got {sorted(dims)}")
    dim = dims.pop()
    p = w / w.sum()

    def sampler(fval: np.ndarray, seed: SeedLike, size: Optional[int] = None) -> np.ndarray:
        pick_seed, *component_seeds = spawn_seeds(seed, len(ms) + 1)
        wanted = 1 if size is None else int(size)
        picks = make_rng(pick_seed).choice(len(ms), size=wanted, p=p)
        out = np.empty((wanted, ms[0].output_dim))
        for i, (m, s) in enumerate(zip(ms, component_seeds)):
            rows = picks == i
            count = int(rows.sum())
            if count:
                out[rows] = m.sample(fval, s, count)
        return out[0] if size is None else out

    dens: Optional[DensityFn] = None
    if all(m.density is not None for m in ms):

        def dens(fval: np.ndarray, z: np.ndarray) -> np.ndarray:
            return sum(wi * m.density(fval, z) for wi, m in zip(p, ms))  # type: ignore[misc,return-value]

    invariants = {id(m.invariant) for m in ms}
    shared = ms[0].invariant if len(invariants) == 1 else None
    budget = PrivacyParams(max(m.budget.epsilon for m in ms), max(m.budget.delta for m in ms))
    return MechanismHandle(
        sampler, budget, dim, shared, dens, None, name="mixture", out_dim=ms[0].output_dim
    )


def postprocess(
    m: MechanismHandle,
    h: Callable[[np.ndarray], np.ndarray],
    invariant: Optional[Invariant] = None,
    name: Optional[str] = None,
    out_dim: Optional[int] = None,
) -> MechanismHandle:
    """``h o M`` with the budget of ``M``.

    ``h`` must act on the last axis so it works for single draws and
    batches alike. The invariant of ``M`` does not carry over unless passed.
    """

    def sampler(fval: np.ndarray, seed: SeedLike, size: Optional[int] = None) -> np.ndarray:
        return np.asarray(h(m.sample(fval, seed, size)))

    return MechanismHandle(
        sampler,
        m.budget,
        m.dim,
        invariant,
        None,
        None,
        name=name or f"post({m.name})",
        out_dim=out_dim,
    )


def image_of(m: MechanismHandle, inv: Invariant) -> MechanismHandle:
    """Imaging of an arbitrary mechanism: project its releases onto ``inv``."""
    return postprocess(m, Projector(inv), invariant=inv, name=f"image({m.name})")

