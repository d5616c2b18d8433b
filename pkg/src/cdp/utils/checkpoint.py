"""Checkpoint management for resumable benchmark sweeps."""

import json
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, Optional

from cdp.core.results import CellKey, CellResult

if TYPE_CHECKING:
    from cdp.core.context import BenchContext


class CheckpointManager:
    """Saves and restores finished benchmark cells.

    A checkpoint stores the scores of every completed cell together with the
    config fingerprint, so an interrupted sweep resumes where it stopped and
    produces the same table as an uninterrupted one.

    Example:
        manager = CheckpointManager(output_dir)

        # Save as cells finish
        manager.save(context)

        # Load on resume
        if manager.exists():
            manager.restore_context(context)
    """

    CHECKPOINT_FILE = "checkpoint.json"

    def __init__(self, output_dir: Path):
        """Initialize checkpoint manager.

        Args:
            output_dir: Directory for checkpoint files.
        """
        self.output_dir = Path(output_dir)
        self.checkpoint_path = self.output_dir / self.CHECKPOINT_FILE

    def exists(self) -> bool:
        return self.checkpoint_path.exists()

    def save(self, context: "BenchContext") -> None:
        """Write every finished cell of ``context``.

        The file is written to a temporary name and moved into place.
        """
        self.output_dir.mkdir(parents=True, exist_ok=True)
        checkpoint_data = {
            "fingerprint": context.config.fingerprint(),
            "cells": {key.label(): cell.to_dict() for key, cell in sorted(context.cells.items())},
        }
        tmp = self.checkpoint_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(checkpoint_data, indent=2))
        tmp.replace(self.checkpoint_path)

    def load(self) -> Optional[Dict[str, Any]]:
        """Load checkpoint data.

        Returns:
            Checkpoint data dictionary or None if loading fails.
        """
        if not self.exists():
            return None

        try:
            return json.loads(self.checkpoint_path.read_text())
        except (json.JSONDecodeError, OSError) as e:
            print(f"Warning: Could not load checkpoint: {e}")
            return None

    def restore_context(self, context: "BenchContext") -> bool:
        """Restore finished cells into ``context``.

        A checkpoint written for a different config is ignored.

        Returns:
            True if cells were restored.
        """
        data = self.load()
        if not data:
            return False

        if data.get("fingerprint") != json.loads(json.dumps(context.config.fingerprint())):
            print("Warning: Checkpoint belongs to a different config; starting fresh")
            return False

        for label, cell in data.get("cells", {}).items():
            key = CellKey.parse(label)
            context.cells[key] = CellResult.from_dict(key, cell)
        context.resumed = True
        return True

    def cleanup(self) -> None:
        """Remove checkpoint files after successful completion."""
        if self.checkpoint_path.exists():
            self.checkpoint_path.unlink()
            print("  Checkpoint cleared")
