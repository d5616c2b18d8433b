"""Release stage - one private release per (epsilon, mechanism, repetition) cell.

Every cell draws from its own stream ``cell_seed(seed, (eps_idx, mech_idx, rep))``,
so results do not depend on the worker count or completion order. Noise is
calibrated for a counting query (L1 sensitivity 1, ``lambda = 1 / epsilon``)
and added to every node, leaves and internal alike, before the mechanism
restores consistency.
"""

from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from cdp.config.settings import ExperimentConfig, worker_threads
from cdp.core.context import BenchContext
from cdp.core.results import CellKey, CellResult
from cdp.core.stage import PipelineStage, StageError
from cdp.invariants.affine import AffineEquality, Invariant, contains, split_invariant
from cdp.invariants.hierarchy import Hierarchy
from cdp.mechanisms.noise import NoiseSpec, calibrate_laplace, sample_additive
from cdp.revision.conditional import rejection_sample
from cdp.revision.mh import MHConfig, mh_sample
from cdp.stages.score import level_labels, normalized_l1
from cdp.update.imaging import imaged_mechanism
from cdp.update.projection import Projector
from cdp.update.topdown import topdown
from cdp.utils.checkpoint import CheckpointManager
from cdp.utils.rng import SeedLike, cell_seed, make_rng

# Counting queries change by at most one per record
COUNT_SENSITIVITY = 1.0

# Finished cells between checkpoint writes
CHECKPOINT_EVERY = 10


@dataclass(frozen=True, eq=False)
class ReleaseTask:
    """Everything a worker needs to release and score cells.

    Attributes:
        config: Experiment configuration.
        data: Confidential node vector.
        hierarchy: Region hierarchy.
        invariant: Full invariant (equalities, maybe ``x >= 0``).
        projector: Shared projector onto ``invariant``.
    """

    config: ExperimentConfig
    data: np.ndarray
    hierarchy: Hierarchy
    invariant: Invariant
    projector: Projector

    @property
    def equalities(self) -> Optional[AffineEquality]:
        return split_invariant(self.invariant)[0]

    def release(self, epsilon: float, mechanism: str, seed: SeedLike) -> np.ndarray:
        """One constrained release of the confidential data."""
        cfg = self.config
        if cfg.zero_noise:
            return self.data.copy()
        lam = calibrate_laplace(COUNT_SENSITIVITY, epsilon)
        noise = NoiseSpec.laplace(lam, self.hierarchy.size)
        if mechanism == "topdown":
            return topdown(self.hierarchy, sample_additive(self.data, noise, seed))
        if mechanism == "image":
            return imaged_mechanism(self.data, noise, self.invariant, seed, projector=self.projector)
        if mechanism == "rejection":
            return rejection_sample(self.data, noise, self.invariant, seed)
        return self._mh_release(noise, seed)

    def _mh_release(self, noise: NoiseSpec, seed: SeedLike) -> np.ndarray:
        cfg = self.config
        s = cfg.mh
        chain_mean = cfg.release_mode == "chain_mean"
        mh_cfg = MHConfig(
            n_samples=s.chain_draws if chain_mean else 1,
            burn_in=s.burn_in,
            thinning=s.thinning,
            seed=int(make_rng(seed).integers(0, 2 ** 63)),
            proposal_scale=s.proposal_scale,
            density_mode=s.density_mode,
        )
        _, ineq = split_invariant(self.invariant)
        run = mh_sample(self.data, noise, self.hierarchy, ineq, mh_cfg)
        return run.draws.mean(axis=0) if chain_mean else run.draws[-1]

    def run_cell(self, key: CellKey) -> CellResult:
        """Release and score one cell; failures become NaN scores with a reason."""
        cfg = self.config
        epsilon = cfg.epsilons[key.eps_idx]
        mechanism = cfg.mechanisms[key.mech_idx]
        try:
            released = self.release(epsilon, mechanism, cell_seed(cfg.seed, key))
            eq = self.equalities
            if eq is not None and not contains(eq, released):
                raise ValueError("release violates the hierarchy constraints")
        except Exception as e:
            nan = {label: float("nan") for label in level_labels(self.hierarchy)}
            return CellResult(key, nan, f"{type(e).__name__}: {e}")
        return CellResult(key, normalized_l1(self.data, released, self.hierarchy))


def sweep_keys(config: ExperimentConfig) -> List[CellKey]:
    return [
        CellKey(ei, mi, rep)
        for ei in range(len(config.epsilons))
        for mi in range(len(config.mechanisms))
        for rep in range(config.repetitions)
    ]


class ReleaseStage(PipelineStage):
    """Stage that produces and scores every pending cell on a thread pool.

    Results are collected on the calling thread only. With an output
    directory the finished cells are checkpointed every ``CHECKPOINT_EVERY``
    completions and when the stage stops, including on interrupt.
    """

    @property
    def name(self) -> str:
        return "release"

    def should_skip(self, context: BenchContext) -> bool:
        """Skip when a restored checkpoint already holds every cell of the sweep."""
        return context.resumed and all(key in context.cells for key in sweep_keys(context.config))

    def execute(self, context: BenchContext) -> BenchContext:
        """Release all cells not already in ``context.cells``.

        Args:
            context: Context with data, hierarchy and invariant loaded.

        Returns:
            Updated context with every cell scored.
        """
        context.echo("\n--- Stage: Releasing ---")
        if context.data is None or context.hierarchy is None or context.invariant is None:
            raise StageError(self.name, "no data loaded")

        cfg = context.config
        task = ReleaseTask(
            config=cfg,
            data=context.data,
            hierarchy=context.hierarchy,
            invariant=context.invariant,
            projector=Projector(context.invariant),
        )
        pending = [key for key in sweep_keys(cfg) if key not in context.cells]
        threads = worker_threads(cfg)
        context.metadata["threads"] = threads
        if context.resumed:
            context.echo(f"  Restored {len(context.cells)} finished cells")
        context.echo(f"  Cells: {len(pending)} pending on {threads} thread(s)")

        manager = CheckpointManager(context.output_dir) if context.output_dir is not None else None
        finished = 0
        try:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                futures = {pool.submit(task.run_cell, key): key for key in pending}
                for future in as_completed(futures):
                    cell = future.result()
                    context.cells[cell.key] = cell
                    finished += 1
                    if manager is not None and finished % CHECKPOINT_EVERY == 0:
                        manager.save(context)
        finally:
            if manager is not None and finished:
                manager.save(context)

        self._report_failures(context)
        return context

    def _report_failures(self, context: BenchContext) -> None:
        cfg = context.config
        failed: Dict[str, int] = {}
        for cell in sorted(context.failures, key=lambda c: c.key):
            label = f"eps={cfg.epsilons[cell.key.eps_idx]:g} {cfg.mechanisms[cell.key.mech_idx]}"
            if label not in failed:
                context.echo(f"Warning: {label} rep {cell.key.rep} failed: {cell.reason}")
            failed[label] = failed.get(label, 0) + 1
        if failed:
            context.echo(f"  Failed cells: {sum(failed.values())}")
        context.metadata["failed_cells"] = sum(failed.values())

