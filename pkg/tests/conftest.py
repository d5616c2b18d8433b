"""Shared fixtures."""

from pathlib import Path
from typing import Dict, Optional

import numpy as np
import pandas as pd
import pytest

from cdp.invariants.hierarchy import Hierarchy

# Borough sizes of the 263-zone taxi hierarchy
TAXI_BOROUGHS = (69, 61, 56, 43, 20, 14)


def taxi_parents() -> Dict[str, Optional[str]]:
    parents: Dict[str, Optional[str]] = {"city": None}
    zone = 0
    for b, size in enumerate(TAXI_BOROUGHS, start=1):
        parents[f"borough{b}"] = "city"
        for _ in range(size):
            zone += 1
            parents[f"zone{zone}"] = f"borough{b}"
    return parents


@pytest.fixture
def taxi() -> Hierarchy:
    return Hierarchy.from_parents(taxi_parents())


@pytest.fixture
def small() -> Hierarchy:
    """Root with three regions of two leaves each (10 nodes)."""
    return Hierarchy.from_branching((3, 2))


@pytest.fixture
def small_files(tmp_path: Path, small: Hierarchy):
    """Hierarchy and leaf-count CSVs for ``small``; returns (counts, hierarchy, leaf counts)."""
    hierarchy_path = tmp_path / "hierarchy.csv"
    small.to_frame().to_csv(hierarchy_path, index=False)
    counts = {leaf: float(10 * (i + 1)) for i, leaf in enumerate(small.leaves())}
    counts_path = tmp_path / "counts.csv"
    pd.DataFrame({"node": list(counts), "count": list(counts.values())}).to_csv(counts_path, index=False)
    return counts_path, hierarchy_path, counts


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)
