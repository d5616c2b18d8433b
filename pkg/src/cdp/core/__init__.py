"""Core pipeline components."""

from cdp.core.context import BenchContext
from cdp.core.errors import CDPError
from cdp.core.results import CellKey, CellResult, EmptyTableError, ResultRow, ResultTable
from cdp.core.stage import PipelineStage, StageError

# Lazy imports to avoid circular dependencies (stages import the library,
# which imports cdp.core.errors):
#   from cdp.core.pipeline import Pipeline, run_benchmark

__all__ = [
    "BenchContext",
    "CDPError",
    "CellKey",
    "CellResult",
    "EmptyTableError",
    "Pipeline",
    "PipelineStage",
    "ResultRow",
    "ResultTable",
    "StageError",
    "run_benchmark",
]


def __getattr__(name: str):
    """Lazy import of the pipeline."""
    if name in ("Pipeline", "run_benchmark"):
        from cdp.core import pipeline
        return getattr(pipeline, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
