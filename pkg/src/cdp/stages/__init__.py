"""Pipeline stages for benchmark sweeps."""

from cdp.stages.load import (
    HierarchyMismatchError,
    LoadStage,
    NegativeCountError,
    bench_invariant,
    load_counts,
    synth_data,
)
from cdp.stages.release import ReleaseStage, ReleaseTask, sweep_keys
from cdp.stages.score import ScoreStage, aggregate_cells, normalized_l1

__all__ = [
    "HierarchyMismatchError",
    "LoadStage",
    "NegativeCountError",
    "ReleaseStage",
    "ReleaseTask",
    "ScoreStage",
    "aggregate_cells",
    "bench_invariant",
    "load_counts",
    "normalized_l1",
    "sweep_keys",
    "synth_data",
]
