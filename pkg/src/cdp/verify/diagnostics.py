"""Quality gate for sampler runs."""

from dataclasses import dataclass
from typing import Any, Dict

import numpy as np

from cdp.core.errors import CDPError
from cdp.revision.mh import ESS_BATCHES, SampleSet, batch_means_ess

MIN_DRAWS = 100


class TooFewSamplesError(CDPError, ValueError):
    """Raised when a run has fewer than 100 draws."""


@dataclass(frozen=True, eq=False)
class ChainDiagnostics:
    """Summary of a sampler run.

    Attributes:
        acceptance_rate: Accepted over proposed.
        ess: Batch-means effective sample size.
        degenerate: True when no coordinate moved.
        n_draws: Number of draws summarised.
        mean: Per-coordinate sample mean.
        variance: Per-coordinate sample variance.
    """

    acceptance_rate: float
    ess: float
    degenerate: bool
    n_draws: int
    mean: np.ndarray
    variance: np.ndarray

    def to_dict(self) -> Dict[str, Any]:
        return {
            "acceptance_rate": self.acceptance_rate,
            "ess": self.ess,
            "degenerate": self.degenerate,
            "n_draws": self.n_draws,
            "mean": self.mean.tolist(),
            "variance": self.variance.tolist(),
        }


def mcmc_diagnostics(s: SampleSet, batches: int = ESS_BATCHES) -> ChainDiagnostics:
    """Acceptance rate, batch-means ESS and per-coordinate moments.

    The acceptance rate is recomputed from the counters when they are set.

    Raises:
        TooFewSamplesError: If the run has fewer than 100 draws.
    """
    draws = np.asarray(s.draws, dtype=np.float64)
    if draws.shape[0] < MIN_DRAWS:
        raise TooFewSamplesError(f"need at least {MIN_DRAWS} draws, got {draws.shape[0]}")
    ess, degenerate = batch_means_ess(draws, s.n_chains, batches)
    rate = s.accepted / s.proposed if s.proposed else s.acceptance_rate
    return ChainDiagnostics(
        acceptance_rate=float(rate),
        ess=ess,
        degenerate=degenerate,
        n_draws=int(draws.shape[0]),
        mean=draws.mean(axis=0),
        variance=draws.var(axis=0, ddof=1),
    )
