"""Benchmark context for shared state between stages."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, List, Optional

import numpy as np

from cdp.core.results import CellKey, CellResult

if TYPE_CHECKING:
    from cdp.config.settings import ExperimentConfig
    from cdp.core.results import ResultTable
    from cdp.invariants.affine import Invariant
    from cdp.invariants.hierarchy import Hierarchy


@dataclass
class BenchContext:
    """Shared state passed between benchmark stages.

    Attributes:
        config: Experiment configuration.
        output_dir: Where tables and the checkpoint go; ``None`` keeps
            everything in memory.
        table_name: File name of the CSV table; other formats swap the suffix.

        data: Confidential node values ordered as ``hierarchy.nodes``
            (populated by LoadStage).
        hierarchy: Region hierarchy (populated by LoadStage).
        invariant: Constraint every release must satisfy (populated by
            LoadStage).
        cells: Scored releases keyed by (epsilon index, mechanism index,
            repetition) (populated by ReleaseStage).
        table: Aggregated result table (populated by ScoreStage).

        resumed: Whether finished cells were restored from a checkpoint.
        outputs: Files written by the run.
        metadata: Free-form run facts (data source, worker count).
    """

    config: "ExperimentConfig"
    output_dir: Optional[Path] = None
    table_name: str = "results.csv"

    data: Optional[np.ndarray] = None
    hierarchy: Optional["Hierarchy"] = None
    invariant: Optional["Invariant"] = None
    cells: Dict[CellKey, CellResult] = field(default_factory=dict)
    table: Optional["ResultTable"] = None

    resumed: bool = False
    outputs: List[Path] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def checkpoint_path(self) -> Optional[Path]:
        """Path to checkpoint file."""
        if self.output_dir is None:
            return None
        return self.output_dir / "checkpoint.json"

    @property
    def table_path(self) -> Path:
        """Path to the CSV result table."""
        assert self.output_dir is not None
        return self.output_dir / self.table_name

    @property
    def failures(self) -> List[CellResult]:
        return [c for c in self.cells.values() if not c.ok]

    def echo(self, message: str) -> None:
        """Print progress unless the config is quiet."""
        if self.config.verbose:
            print(message)
