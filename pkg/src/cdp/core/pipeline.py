"""Pipeline orchestrator for benchmark sweeps."""

from pathlib import Path
from typing import List, Optional

from cdp.config.settings import ExperimentConfig
from cdp.core.context import BenchContext
from cdp.core.results import ResultTable
from cdp.core.stage import PipelineStage, StageError
from cdp.utils.checkpoint import CheckpointManager
from cdp.utils.io import emit_table


class Pipeline:
    """Orchestrates execution of benchmark stages.

    The Pipeline runs a sequence of stages over one ``BenchContext``,
    handles resuming from a checkpoint and writes the result table.

    Example:
        from cdp.config import ExperimentConfig
        from cdp.core.pipeline import Pipeline
        from cdp.stages import LoadStage, ReleaseStage, ScoreStage

        config = ExperimentConfig(epsilons=[0.5, 1.0, 2.0], repetitions=20)
        pipeline = Pipeline(config=config)

        pipeline.add_stage(LoadStage())
        pipeline.add_stage(ReleaseStage())
        pipeline.add_stage(ScoreStage())

        context = pipeline.run(output_dir=Path("./output"))
    """

    def __init__(self, config: ExperimentConfig, stages: Optional[List[PipelineStage]] = None):
        """Initialize the pipeline.

        Args:
            config: Experiment configuration.
            stages: Optional list of stages to execute.
        """
        self.config = config
        self.stages: List[PipelineStage] = stages or []

    def add_stage(self, stage: PipelineStage) -> "Pipeline":
        """Add a stage to the pipeline.

        Provides a fluent API for building pipelines.

        Args:
            stage: Stage to add.

        Returns:
            Self for chaining.
        """
        self.stages.append(stage)
        return self

    def run(self, output_dir: Optional[Path] = None, table_name: str = "results.csv") -> BenchContext:
        """Execute all pipeline stages.

        Args:
            output_dir: Directory for tables and the checkpoint; ``None``
                keeps the run in memory.
            table_name: CSV file name inside ``output_dir``.

        Returns:
            Final context after all stages.

        Raises:
            StageError: If a stage fails to execute.
            EmptyTableError: If the sweep produced no rows to write.
        """
        context = BenchContext(config=self.config, output_dir=output_dir, table_name=table_name)
        source = self.config.counts_path or "synthetic data"
        context.echo(f"Starting benchmark on {source}")

        checkpoint_manager = CheckpointManager(output_dir) if output_dir is not None else None
        if checkpoint_manager is not None and self.config.resume and checkpoint_manager.exists():
            if checkpoint_manager.restore_context(context):
                context.echo(f"Resumed from checkpoint with {len(context.cells)} cells")

        for stage in self.stages:
            if stage.should_skip(context):
                context.echo(f"Skipping stage: {stage.name}")
                continue

            try:
                context = stage.execute(context)
            except Exception as e:
                stage.on_error(context, e)
                if isinstance(e, StageError):
                    raise
                raise StageError(stage.name, f"{type(e).__name__}: {e}") from e

        if output_dir is not None and self._save_output(context):
            assert checkpoint_manager is not None
            checkpoint_manager.cleanup()
            context.echo(f"\nBenchmark complete. Table saved to: {context.table_path}")

        return context

    def _save_output(self, context: BenchContext) -> List[Path]:
        """Write the result table in every configured format.

        Args:
            context: Context with the table populated.

        Returns:
            Paths written.
        """
        context.echo("\n--- Saving output ---")
        if context.table is None:
            context.echo("Warning: No result table to save")
            return []

        paths = [emit_table(context.table, context.table_path, "csv")]
        for fmt in context.config.formats:
            if fmt != "csv":
                paths.append(emit_table(context.table, context.table_path.with_suffix(f".{fmt}"), fmt))
        for path in paths:
            context.echo(f"  Table: {path}")
        context.outputs.extend(paths)
        return paths

    @classmethod
    def create_default(cls, config: ExperimentConfig) -> "Pipeline":
        """Create a pipeline with the standard stages: Load -> Release -> Score.

        Args:
            config: Experiment configuration.

        Returns:
            Configured Pipeline instance.
        """
        from cdp.stages.load import LoadStage
        from cdp.stages.release import ReleaseStage
        from cdp.stages.score import ScoreStage

        pipeline = cls(config=config)
        pipeline.add_stage(LoadStage())
        pipeline.add_stage(ReleaseStage())
        pipeline.add_stage(ScoreStage())
        return pipeline


def run_benchmark(cfg: ExperimentConfig, output_dir: Optional[Path] = None) -> ResultTable:
    """Run the default sweep and return its table.

    Cells that fail are NaN with a reason in the table; the sweep itself
    only raises for problems outside a single cell (bad data, no table).
    """
    context = Pipeline.create_default(cfg).run(output_dir=output_dir)
    assert context.table is not None
    return context.table
