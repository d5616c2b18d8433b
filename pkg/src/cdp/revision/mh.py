"""Constrained Metropolis-Hastings for M(.|C) on equality invariants.

``mh_sample`` walks on the leaf coordinates of a hierarchy and rebuilds every
internal node from its children, so each state satisfies the hierarchy
equalities by construction. ``mh_sample_affine`` does the same on the free
chart of a general affine equality. Both use a symmetric Gaussian random walk,
so the acceptance probability is ``min(1, p(x') / p(x))`` times the indicator
of the optional inequality system.

Chains are vectorised: ``n_chains`` independent chains advance together and
their draws are stacked chain by chain.
"""

import math
import warnings
from dataclasses import dataclass, replace
from typing import Any, Callable, Optional, Tuple

import numpy as np

from cdp.core.errors import CDPError, check_length
from cdp.invariants.affine import (
    AffineEquality,
    AffineInequality,
    Invariant,
    contains,
    solve_free_parametrization,
    split_invariant,
)
from cdp.invariants.hierarchy import Hierarchy, hierarchy_to_equalities
from cdp.mechanisms.noise import NoiseSpec, log_kernel, sample_noise
from cdp.revision.conditional import InfeasibleInvariantError, rejection_sample
from cdp.utils.rng import SeedLike, make_rng

ESS_BATCHES = 50
MIN_ACCEPTANCE = 0.01
MIN_ESS = 50.0
RANDOM_INIT_TRIES = 1000


class NonconvergenceWarning(UserWarning):
    """Acceptance rate below 1% or effective sample size below 50."""


class InfeasibleStartError(CDPError, ValueError):
    """Raised when the initial chain state violates the inequality system."""


class MHConfigError(CDPError, ValueError):
    """Raised for invalid sampler settings."""


@dataclass(frozen=True)
class MHConfig:
    """Sampler settings.

    Attributes:
        n_samples: Draws kept after burn-in and thinning, over all chains.
        burn_in: Iterations discarded at the start of every chain.
        thinning: Keep every ``thinning``-th post-burn-in state.
        seed: Seed of the chain streams.
        proposal_scale: Random-walk standard deviation per free coordinate;
            ``None`` uses ``scale * min(1, 2.38 / sqrt(k))`` for ``k`` free
            coordinates.
        n_chains: Independent chains run side by side; must divide
            ``n_samples``.
        init: ``fval`` (start at the query value) or ``random`` (a random
            feasible point near it).
        density_mode: ``full`` evaluates the noise density on all
            coordinates, ``leaf`` only on the leaves.
    """

    n_samples: int = 10_000
    burn_in: int = 10_000
    thinning: int = 1
    seed: int = 0
    proposal_scale: Optional[float] = None
    n_chains: int = 1
    init: str = "fval"
    density_mode: str = "full"

    def __post_init__(self) -> None:
        if self.n_samples <= 0:
            raise MHConfigError(f"n_samples must be positive, got {self.n_samples}")
        if self.burn_in < 0:
            raise MHConfigError(f"burn_in must be >= 0, got {self.burn_in}")
        if self.thinning < 1:
            raise MHConfigError(f"thinning must be >= 1, got {self.thinning}")
        if self.n_chains < 1 or self.n_samples % self.n_chains:
            raise MHConfigError(
                f"n_chains={self.n_chains} must be positive and divide n_samples={self.n_samples}"
            )
        if self.proposal_scale is not None and not self.proposal_scale > 0:
            raise MHConfigError(f"proposal_scale must be positive, got {self.proposal_scale}")
        if self.init not in ("fval", "random"):
            raise MHConfigError(f"init must be 'fval' or 'random', got {self.init!r}")
        if self.density_mode not in ("full", "leaf"):
            raise MHConfigError(f"density_mode must be 'full' or 'leaf', got {self.density_mode!r}")

    @property
    def per_chain(self) -> int:
        return self.n_samples // self.n_chains


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Output of a sampler run.

    Attributes:
        draws: ``(n_samples, n)`` array, chains stacked one after another.
        acceptance_rate: Accepted proposals over all proposals (burn-in included).
        ess: Batch-means effective sample size.
        seed: Seed the run was started from.
        n_chains: Number of chains in ``draws``.
        accepted: Accepted proposal count.
        proposed: Proposal count.
        degenerate: True when every coordinate of every chain is constant.
    """

    draws: np.ndarray
    acceptance_rate: float
    ess: float
    seed: int
    n_chains: int = 1
    accepted: int = 0
    proposed: int = 0
    degenerate: bool = False

    def __len__(self) -> int:
        return int(self.draws.shape[0])

    def chains(self) -> np.ndarray:
        """Draws reshaped to ``(n_chains, per_chain, n)``."""
        return self.draws.reshape(self.n_chains, -1, self.draws.shape[-1])


def batch_means_ess(draws: np.ndarray, n_chains: int = 1, batches: int = ESS_BATCHES) -> Tuple[float, bool]:
    """Effective sample size by batch means.

    Each chain is cut into ``batches`` batches; per coordinate the ratio of
    ``batch size * var(batch means)`` to the sample variance estimates the
    integrated autocorrelation time. The ESS is the total draw count divided
    by the mean of these ratios over all non-constant coordinates. Chains
    shorter than ``batches`` give NaN. A run with no varying coordinate
    reports ESS 1 and ``degenerate=True``.
    """
    x = np.asarray(draws, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, np.newaxis]
    total = x.shape[0]
    chains = x.reshape(n_chains, -1, x.shape[-1])
    length = chains.shape[1]
    size = length // batches
    if size < 1:
        return float("nan"), False
    trimmed = chains[:, : size * batches, :]
    means = trimmed.reshape(n_chains, batches, size, -1).mean(axis=2)
    var_batch = means.var(axis=1, ddof=1) * size
    var_all = trimmed.var(axis=1, ddof=1)
    scale = np.maximum(np.abs(trimmed).max(axis=1), 1.0)
    varying = var_all > (1e-12 * scale) ** 2
    if not np.any(varying):
        return 1.0, True
    tau = var_batch[varying] / var_all[varying]
    return float(total / max(float(tau.mean()), 1e-12)), False


def _default_scale(noise: NoiseSpec, k: int) -> float:
    return noise.scale * min(1.0, 2.38 / math.sqrt(max(k, 1)))


def _run_chains(
    start: np.ndarray,
    to_state: Callable[[np.ndarray], np.ndarray],
    log_target: Callable[[np.ndarray], np.ndarray],
    feasible: Callable[[np.ndarray], np.ndarray],
    step: float,
    cfg: MHConfig,
    rng: np.random.Generator,
) -> SampleSet:
    """Random-walk Metropolis over chart coordinates ``start`` of shape ``(chains, k)``."""
    chains, k = start.shape
    current = start.copy()
    state = to_state(current)
    logp = log_target(state)
    keep = np.empty((cfg.per_chain, chains, state.shape[-1]))
    accepted = 0
    proposed = 0
    total = cfg.burn_in + cfg.per_chain * cfg.thinning
    kept = 0
    for it in range(total):
        candidate = current + step * rng.standard_normal((chains, k))
        cand_state = to_state(candidate)
        cand_logp = log_target(cand_state)
        log_u = np.log(rng.random(chains))
        move = (log_u < cand_logp - logp) & feasible(cand_state)
        current[move] = candidate[move]
        state[move] = cand_state[move]
        logp[move] = cand_logp[move]
        accepted += int(move.sum())
        proposed += chains
        if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thinning == cfg.thinning - 1:
            keep[kept] = state
            kept += 1
    draws = keep.transpose(1, 0, 2).reshape(-1, state.shape[-1])
    ess, degenerate = batch_means_ess(draws, chains)
    rate = accepted / proposed
    result = SampleSet(
        draws=draws,
        acceptance_rate=rate,
        ess=ess,
        seed=cfg.seed,
        n_chains=chains,
        accepted=accepted,
        proposed=proposed,
        degenerate=degenerate,
    )
    if rate < MIN_ACCEPTANCE or ess < MIN_ESS or degenerate:
        warnings.warn(
            f"chain may not have converged: acceptance {rate:.3%}, ESS {ess:.1f}",
            NonconvergenceWarning,
            stacklevel=3,
        )
    return result


def _feasibility(ineq: Optional[AffineInequality]) -> Callable[[np.ndarray], np.ndarray]:
    if ineq is None or ineq.rows == 0:
        return lambda z: np.ones(z.shape[0], dtype=bool)
    return lambda z: np.asarray(contains(ineq, z), dtype=bool)


def _random_start(
    rng: np.random.Generator,
    base: np.ndarray,
    noise: NoiseSpec,
    to_state: Callable[[np.ndarray], np.ndarray],
    feasible: Callable[[np.ndarray], np.ndarray],
    chains: int,
) -> np.ndarray:
    start = np.tile(base, (chains, 1))
    pending = np.ones(chains, dtype=bool)
    for _ in range(RANDOM_INIT_TRIES):
        trial = base + sample_noise(noise.with_dim(base.shape[-1]), rng, size=chains)
        ok = pending & feasible(to_state(trial))
        start[ok] = trial[ok]
        pending &= ~ok
        if not pending.any():
            return start
    raise InfeasibleStartError(
        f"no feasible random start for {int(pending.sum())} chain(s) after {RANDOM_INIT_TRIES} tries"
    )


def mh_sample(
    fval: Any,
    noise: NoiseSpec,
    h: Hierarchy,
    ineq: Optional[AffineInequality] = None,
    cfg: Optional[MHConfig] = None,
) -> SampleSet:
    """Hierarchical constrained MH: propose leaves, rebuild internal nodes, accept.

    ``fval`` and every draw are ordered as ``h.nodes``.

    Raises:
        InfeasibleInvariantError: If ``fval`` is not consistent with ``h``.
        InfeasibleStartError: If the starting state violates ``ineq``.
    """
    cfg = cfg or MHConfig()
    f = np.asarray(fval, dtype=np.float64)
    check_length(f.shape[-1], h.size, "query value")
    check_length(noise.dim, h.size, "noise")
    if not contains(hierarchy_to_equalities(h), f):
        raise InfeasibleInvariantError("query value is not consistent with the hierarchy")
    leaf_idx = h.leaf_indices()
    rng = make_rng(cfg.seed)
    feasible = _feasibility(ineq)

    if cfg.density_mode == "leaf":
        leaf_noise = noise.with_dim(leaf_idx.size)

        def log_target(z: np.ndarray) -> np.ndarray:
            return log_kernel(leaf_noise, z[..., leaf_idx] - f[leaf_idx])
    else:

        def log_target(z: np.ndarray) -> np.ndarray:
            return log_kernel(noise, z - f)

    base = f[leaf_idx]
    if cfg.init == "random":
        start = _random_start(rng, base, noise, h.aggregate, feasible, cfg.n_chains)
    else:
        start = np.tile(base, (cfg.n_chains, 1))
        if not feasible(h.aggregate(start)).all():
            raise InfeasibleStartError("query value violates the inequality system")
    step = cfg.proposal_scale or _default_scale(noise, leaf_idx.size)
    return _run_chains(start, h.aggregate, log_target, feasible, step, cfg, rng)


def mh_sample_affine(
    fval: Any,
    noise: NoiseSpec,
    eq: AffineEquality,
    ineq: Optional[AffineInequality] = None,
    cfg: Optional[MHConfig] = None,
) -> SampleSet:
    """Constrained MH on the free chart of ``{z : A z = b}``.

    Raises:
        InfeasibleInvariantError: If ``fval`` violates ``eq``.
        InfeasibleStartError: If the starting state violates ``ineq``.
    """
    cfg = cfg or MHConfig()
    f = np.asarray(fval, dtype=np.float64)
    check_length(f.shape[-1], noise.dim, "query value")
    if not contains(eq, f):
        raise InfeasibleInvariantError("query value violates the equality invariant")
    param = solve_free_parametrization(eq)
    rng = make_rng(cfg.seed)
    feasible = _feasibility(ineq)

    def log_target(z: np.ndarray) -> np.ndarray:
        return log_kernel(noise, z - f)

    base = param.free_part(f)
    if cfg.init == "random":
        start = _random_start(rng, base, noise, param.solve, feasible, cfg.n_chains)
    else:
        start = np.tile(base, (cfg.n_chains, 1))
        if not feasible(param.solve(start)).all():
            raise InfeasibleStartError("query value violates the inequality system")
    step = cfg.proposal_scale or _default_scale(noise, param.free_dim)
    return _run_chains(start, param.solve, log_target, feasible, step, cfg, rng)


def sample_conditional(
    fval: Any,
    noise: NoiseSpec,
    inv: Invariant,
    seed: SeedLike,
    size: Optional[int] = None,
    cfg: Optional[MHConfig] = None,
) -> np.ndarray:
    """Draws from ``M(D) | C``: rejection for positive-mass sets, MH for equalities.

    For equalities the MH settings come from ``cfg`` with ``n_samples`` and
    ``seed`` overridden; ``n_chains`` is reset to 1 when it does not divide
    the requested size.
    """
    eq, ineq = split_invariant(inv)
    if eq is None or eq.rows == 0:
        return rejection_sample(fval, noise, inv, seed, size=size)
    wanted = 1 if size is None else int(size)
    base = cfg or MHConfig()
    chains = base.n_chains if wanted % base.n_chains == 0 else 1
    chain_seed = int(make_rng(seed).integers(0, 2 ** 63))
    run = mh_sample_affine(
        fval, noise, eq, ineq, replace(base, n_samples=wanted, seed=chain_seed, n_chains=chains)
    )
    return run.draws[0] if size is None else run.draws
