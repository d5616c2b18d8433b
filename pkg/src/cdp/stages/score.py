"""Score stage - normalized L1 error per level and the aggregated table."""

from typing import Dict, Mapping, Sequence

import numpy as np

from cdp.config.settings import ExperimentConfig
from cdp.core.context import BenchContext
from cdp.core.results import ALL_LEVELS, CellKey, CellResult, ResultRow, ResultTable, first_reason, summarize
from cdp.core.stage import PipelineStage, StageError
from cdp.invariants.hierarchy import Hierarchy


def normalized_l1(x: np.ndarray, released: np.ndarray, h: Hierarchy) -> Dict[str, float]:
    """``|x - released|_1 / m`` on each level's coordinates and on all of them.

    The ``all`` score is the node-count-weighted average of the level scores.
    """
    err = np.abs(np.asarray(x, dtype=np.float64) - np.asarray(released, dtype=np.float64))
    scores = {str(level): float(err[h.level_indices(level)].mean()) for level in h.levels()}
    scores[ALL_LEVELS] = float(err.mean())
    return scores


def level_labels(h: Hierarchy) -> list:
    return [str(level) for level in h.levels()] + [ALL_LEVELS]


def aggregate_cells(
    config: ExperimentConfig,
    levels: Sequence[str],
    cells: Mapping[CellKey, CellResult],
) -> ResultTable:
    """One row per (epsilon, level, mechanism) in config order.

    Failed repetitions are left out of the mean; a row whose repetitions all
    failed is NaN and carries the first failure reason.

    Raises:
        KeyError: If a cell of the sweep is missing.
    """
    rows = []
    for ei, eps in enumerate(config.epsilons):
        group = {
            mi: [cells[CellKey(ei, mi, rep)] for rep in range(config.repetitions)]
            for mi in range(len(config.mechanisms))
        }
        for level in levels:
            for mi, mechanism in enumerate(config.mechanisms):
                done = [c for c in group[mi] if c.ok]
                mean, std = summarize([c.scores[level] for c in done])
                rows.append(
                    ResultRow(
                        epsilon=eps,
                        level=level,
                        mechanism=mechanism,
                        mean_l1=mean,
                        std_l1=std,
                        n_ok=len(done),
                        reason=first_reason(group[mi]) or "",
                    )
                )
    return ResultTable(rows)


class ScoreStage(PipelineStage):
    """Stage that folds scored cells into the result table."""

    @property
    def name(self) -> str:
        return "score"

    def execute(self, context: BenchContext) -> BenchContext:
        context.echo("\n--- Stage: Scoring ---")
        if context.hierarchy is None:
            raise StageError(self.name, "no hierarchy loaded")
        context.table = aggregate_cells(context.config, level_labels(context.hierarchy), context.cells)
        for row in context.table:
            if row.level == ALL_LEVELS:
                context.echo(
                    f"  eps={row.epsilon:g} {row.mechanism}: "
                    f"{row.mean_l1:.6f} +/- {row.std_l1:.6f} ({row.n_ok} ok)"
                )
        return context
