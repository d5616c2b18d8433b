"""Pipeline stage abstract base class."""

from abc import ABC, abstractmethod
from typing import TYPE_CHECKING

from cdp.core.errors import CDPError

if TYPE_CHECKING:
    from cdp.core.context import BenchContext


class PipelineStage(ABC):
    """Abstract base class for benchmark stages.

    Each stage reads and extends the shared ``BenchContext``; chained
    together they form a sweep.

    Example:
        class CountStage(PipelineStage):
            @property
            def name(self) -> str:
                return "count"

            def execute(self, context: BenchContext) -> BenchContext:
                context.metadata["nodes"] = context.hierarchy.size
                return context
    """

    @property
    @abstractmethod
    def name(self) -> str:
        """Unique identifier used in progress output and errors."""
        ...

    @abstractmethod
    def execute(self, context: "BenchContext") -> "BenchContext":
        """Run the stage.

        Args:
            context: Current context with configuration and earlier results.

        Returns:
            The updated context.

        Raises:
            StageError: If the stage cannot complete.
        """
        ...

    def should_skip(self, context: "BenchContext") -> bool:
        """Return True to skip this stage for the given context."""
        return False

    def on_error(self, context: "BenchContext", error: Exception) -> None:
        """Hook called before a failure propagates out of the pipeline."""
        pass


class StageError(CDPError):
    """Exception raised when a stage fails to process."""

    def __init__(self, stage_name: str, message: str):
        self.stage_name = stage_name
        self.message = message
        super().__init__(f"Stage '{stage_name}' failed: {message}")
