"""Constrained mechanisms as belief update: M_C = f_L2 o M."""

from typing import Any, Optional

import numpy as np

from cdp.core.errors import check_length
from cdp.invariants.affine import Invariant, contains
from cdp.mechanisms.noise import NoiseSpec, sample_additive
from cdp.revision.conditional import InfeasibleInvariantError
from cdp.update.projection import Projector
from cdp.utils.rng import SeedLike


def imaged_mechanism(
    fval: Any,
    noise: NoiseSpec,
    inv: Invariant,
    seed: SeedLike,
    size: Optional[int] = None,
    projector: Optional[Projector] = None,
) -> np.ndarray:
    """Release the L2 projection of ``fval + U`` onto ``inv``.

    The projection does not look at ``fval``, so the imaged mechanism is a
    post-processing of the additive one. Pass a prebuilt ``projector`` to
    reuse its factorisation across calls.

    Raises:
        InfeasibleInvariantError: If ``fval`` is outside ``inv``.
        ConvergenceError: Propagated from Dykstra's iteration.
    """
    f = np.asarray(fval, dtype=np.float64)
    check_length(f.shape[-1], noise.dim, "query value")
    if not contains(inv, f):
        raise InfeasibleInvariantError("query value lies outside the invariant")
    project = projector or Projector(inv)
    return project.apply(sample_additive(f, noise, seed, size))
