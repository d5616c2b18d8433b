"""Region hierarchies and their consistency constraints.

Level 1 is the root; every other node has exactly one parent on the previous
level. Vectors over a hierarchy use one canonical coordinate order: leaves
first (deepest level first, input order within a level), then internal nodes
bottom-up, root last. For the three-level taxi shape that is
``(zone_1, ..., zone_263, borough_1, ..., borough_6, city)``.
"""

from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from cdp.core.errors import CDPError
from cdp.invariants.affine import AffineEquality


class MalformedHierarchyError(CDPError, ValueError):
    """Raised for cycles, missing or multiple roots, or level skips."""


@dataclass(frozen=True, eq=False)
class Hierarchy:
    """A rooted tree of regions.

    Attributes:
        nodes: Node identifiers in canonical coordinate order.
        parent: Map child -> parent (the root is absent).
        level: Map node -> level index (root = 1).
        children: Map node -> ordered children (derived).
    """

    nodes: Tuple[str, ...]
    parent: Mapping[str, str]
    level: Mapping[str, int]
    children: Mapping[str, Tuple[str, ...]] = field(default_factory=dict)

    @classmethod
    def from_parents(
        cls,
        parents: Mapping[str, Optional[str]],
        levels: Optional[Mapping[str, int]] = None,
    ) -> "Hierarchy":
        """Build and validate a hierarchy from a child -> parent map.

        The root maps to ``None`` (or an empty string). Levels are derived from
        depth when not given; given levels are checked against depth.

        Raises:
            MalformedHierarchyError: On multiple/missing roots, unknown parents,
                cycles or level skips.
        """
        input_order = list(parents)
        parent: Dict[str, str] = {}
        roots = []
        for node, p in parents.items():
            if p is None or p == "":
                roots.append(node)
            else:
                parent[str(node)] = str(p)
        if len(roots) != 1:
            raise MalformedHierarchyError(f"expected exactly one root, found {len(roots)}: {roots[:5]}")
        root = str(roots[0])
        known = set(str(n) for n in input_order)
        for child, p in parent.items():
            if p not in known:
                raise MalformedHierarchyError(f"node {child!r} has unknown parent {p!r}")

        depth: Dict[str, int] = {root: 1}
        for start in parent:
            path = []
            node = start
            while node not in depth:
                if node in path:
                    raise MalformedHierarchyError(f"cycle through node {node!r}")
                path.append(node)
                node = parent[node]
            d = depth[node]
            for n in reversed(path):
                d += 1
                depth[n] = d

        if levels is not None:
            for node, lvl in levels.items():
                if int(lvl) != depth[str(node)]:
                    raise MalformedHierarchyError(
                        f"node {node!r} declared at level {lvl} but sits at depth {depth[str(node)]}"
                    )

        children: Dict[str, List[str]] = defaultdict(list)
        for node in input_order:
            if str(node) in parent:
                children[parent[str(node)]].append(str(node))
        leaves = [str(n) for n in input_order if str(n) not in children]
        internal = [str(n) for n in input_order if str(n) in children]
        leaves.sort(key=lambda n: -depth[n])
        internal.sort(key=lambda n: -depth[n])
        order = tuple(leaves + internal)
        return cls(
            nodes=order,
            parent=dict(parent),
            level=dict(depth),
            children={k: tuple(v) for k, v in children.items()},
        )

    @classmethod
    def from_branching(cls, branching: Sequence[int], prefix: str = "n") -> "Hierarchy":
        """Balanced tree: ``branching[j]`` children per node on level ``j + 1``.

        ``from_branching((6, 4))`` has one root, 6 internal nodes and 24 leaves.
        """
        if any(int(k) < 1 for k in branching):
            raise MalformedHierarchyError(f"branching factors must be >= 1, got {list(branching)}")
        root = prefix
        parents: Dict[str, Optional[str]] = {root: None}
        frontier = [root]
        for k in branching:
            nxt = []
            for node in frontier:
                for i in range(1, int(k) + 1):
                    child = f"{node}.{i}"
                    parents[child] = node
                    nxt.append(child)
            frontier = nxt
        return cls.from_parents(parents)

    @classmethod
    def from_csv(cls, path: Path) -> "Hierarchy":
        """Read a ``node,parent,level`` CSV; the root has an empty parent."""
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
        missing = {"node", "parent"} - set(frame.columns)
        if missing:
            raise MalformedHierarchyError(f"{path}: missing columns {sorted(missing)}")
        if frame["node"].duplicated().any():
            dupes = frame.loc[frame["node"].duplicated(), "node"].tolist()
            raise MalformedHierarchyError(f"{path}: duplicate nodes {dupes[:5]}")
        parents = {row.node: (row.parent or None) for row in frame.itertuples(index=False)}
        levels = None
        if "level" in frame.columns:
            levels = {row.node: int(row.level) for row in frame.itertuples(index=False) if row.level}
        return cls.from_parents(parents, levels)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "node": list(self.nodes),
                "parent": [self.parent.get(n, "") for n in self.nodes],
                "level": [self.level[n] for n in self.nodes],
            }
        )

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def depth(self) -> int:
        return max(self.level.values())

    @property
    def root(self) -> str:
        return self.nodes[-1]

    def index(self, node: str) -> int:
        return self._positions()[node]

    def _positions(self) -> Dict[str, int]:
        return {n: i for i, n in enumerate(self.nodes)}

    def leaves(self) -> List[str]:
        return [n for n in self.nodes if n not in self.children]

    def internal(self) -> List[str]:
        return [n for n in self.nodes if n in self.children]

    def leaf_indices(self) -> np.ndarray:
        pos = self._positions()
        return np.array([pos[n] for n in self.leaves()], dtype=int)

    def level_indices(self, level: int) -> np.ndarray:
        pos = self._positions()
        return np.array([pos[n] for n in self.nodes if self.level[n] == level], dtype=int)

    def levels(self) -> List[int]:
        return list(range(1, self.depth + 1))

    def aggregation_steps(self) -> List[Tuple[np.ndarray, List[np.ndarray]]]:
        """Per level, bottom-up: internal node indices and their children's indices."""
        pos = self._positions()
        steps = []
        for lvl in range(self.depth - 1, 0, -1):
            parents = [n for n in self.nodes if self.level[n] == lvl and n in self.children]
            if not parents:
                continue
            steps.append(
                (
                    np.array([pos[p] for p in parents], dtype=int),
                    [np.array([pos[c] for c in self.children[p]], dtype=int) for p in parents],
                )
            )
        return steps

    def aggregate(self, leaf_values: Iterable[float]) -> np.ndarray:
        """Consistent full vector(s) from leaf values; ``(k,)`` or ``(N, k)`` input.

        Internal nodes are filled level by level from the bottom, each as the
        sum of its children.
        """
        leaves = np.asarray(leaf_values, dtype=np.float64)
        out = np.zeros(leaves.shape[:-1] + (self.size,))
        out[..., self.leaf_indices()] = leaves
        for parent_idx, child_groups in self.aggregation_steps():
            for p, kids in zip(parent_idx, child_groups):
                out[..., p] = out[..., kids].sum(axis=-1)
        return out

    def top_down_blocks(self) -> List[Tuple[int, np.ndarray]]:
        """``(parent index, children indices)`` ordered root first, level by level."""
        pos = self._positions()
        internal = sorted(self.internal(), key=lambda n: (self.level[n], pos[n]))
        return [
            (pos[p], np.array([pos[c] for c in self.children[p]], dtype=int)) for p in internal
        ]


def hierarchy_to_equalities(h: Hierarchy) -> AffineEquality:
    """One row per internal node: (sum of children) - (node) = 0.

    Rows follow the canonical order of internal nodes (bottom-up, root last).
    A single-node hierarchy yields an empty system.
    """
    pos = {n: i for i, n in enumerate(h.nodes)}
    internal = h.internal()
    A = np.zeros((len(internal), h.size))
    for r, node in enumerate(internal):
        for child in h.children[node]:
            A[r, pos[child]] = 1.0
        A[r, pos[node]] = -1.0
    return AffineEquality(A, np.zeros(len(internal)))
