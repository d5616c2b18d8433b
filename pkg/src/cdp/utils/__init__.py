"""Utility functions and helpers."""

# Import directly from the modules:
#   from cdp.utils.rng import make_rng, spawn_seeds, cell_seed
#   from cdp.utils.checkpoint import CheckpointManager
#   from cdp.utils.io import emit_table, parse_table
