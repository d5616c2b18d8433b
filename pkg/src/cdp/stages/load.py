"""Load stage - confidential counts from CSV files or a synthetic generator."""

from pathlib import Path
from typing import Any, Mapping, Tuple, Union

import numpy as np
from scipy import stats

from cdp.config.settings import InvalidSpecError, SynthSpec
from cdp.core.context import BenchContext
from cdp.core.errors import CDPError
from cdp.core.stage import PipelineStage
from cdp.invariants.affine import AffineInequality, ConstraintSet, Invariant
from cdp.invariants.hierarchy import Hierarchy, hierarchy_to_equalities
from cdp.utils.io import read_vector
from cdp.utils.rng import SeedLike, make_rng


class NegativeCountError(CDPError, ValueError):
    """Raised when a leaf count is negative."""

    def __init__(self, nodes: list):
        self.nodes = nodes
        super().__init__(f"negative counts for leaves {nodes[:5]}")


class HierarchyMismatchError(CDPError, ValueError):
    """Raised when the count file's node ids differ from the hierarchy's leaves."""

    def __init__(self, missing: list, extra: list):
        self.missing = missing
        self.extra = extra
        super().__init__(
            f"count ids do not match hierarchy leaves: missing {missing[:5]}, unexpected {extra[:5]}"
        )


def load_counts(counts_path: Path, hierarchy_path: Path) -> Tuple[np.ndarray, Hierarchy]:
    """Read leaf counts and a hierarchy; internal nodes become child sums.

    Args:
        counts_path: ``node,count`` CSV with one row per leaf.
        hierarchy_path: ``node,parent[,level]`` CSV.

    Returns:
        The full node vector ordered as ``h.nodes`` and the hierarchy.

    Raises:
        ParseError: If a file cannot be parsed.
        MalformedHierarchyError: If the hierarchy is not a tree.
        NegativeCountError: If a count is negative.
        HierarchyMismatchError: If count ids are not exactly the leaves.
    """
    h = Hierarchy.from_csv(hierarchy_path)
    nodes, values = read_vector(counts_path)
    leaves = h.leaves()
    missing = sorted(set(leaves) - set(nodes))
    extra = sorted(set(nodes) - set(leaves))
    if missing or extra:
        raise HierarchyMismatchError(missing, extra)
    negative = [n for n, v in zip(nodes, values) if v < 0]
    if negative:
        raise NegativeCountError(negative)
    by_node = dict(zip(nodes, values))
    x = h.aggregate([by_node[leaf] for leaf in leaves])
    return x, h


def synth_data(spec: Union[SynthSpec, Mapping[str, Any]], seed: SeedLike) -> Tuple[np.ndarray, Hierarchy]:
    """Synthetic hierarchy with integer leaf counts.

    Leaf counts come from the inverse CDF of the configured law applied to
    Philox uniforms, so a seed fixes the data.

    Raises:
        InvalidSpecError: If ``spec`` is invalid.
    """
    if not isinstance(spec, SynthSpec):
        if not isinstance(spec, Mapping):
            raise InvalidSpecError(f"synth spec must be a mapping, got {type(spec).__name__}")
        try:
            spec = SynthSpec.from_dict(spec)
        except TypeError as e:
            raise InvalidSpecError(str(e)) from e
    h = Hierarchy.from_branching(spec.branching)
    # ppf(0) is -1 for discrete laws
    u = np.maximum(make_rng(seed).random(spec.leaf_count), np.finfo(np.float64).tiny)
    if spec.distribution == "poisson":
        counts = stats.poisson.ppf(u, spec.mean)
    else:
        p = spec.dispersion / (spec.dispersion + spec.mean)
        counts = stats.nbinom.ppf(u, spec.dispersion, p)
    return h.aggregate(counts), h


def bench_invariant(h: Hierarchy, nonneg: bool = False) -> Invariant:
    """Hierarchy equalities, optionally with ``x >= 0``."""
    eq = hierarchy_to_equalities(h)
    if nonneg:
        return ConstraintSet(eq, AffineInequality.nonnegative(h.size))
    return eq


class LoadStage(PipelineStage):
    """Stage that loads or generates the confidential data."""

    @property
    def name(self) -> str:
        return "load"

    def execute(self, context: BenchContext) -> BenchContext:
        """Populate data, hierarchy and invariant.

        Args:
            context: Benchmark context with the experiment config.

        Returns:
            Updated context.
        """
        cfg = context.config
        context.echo("\n--- Stage: Loading data ---")

        if cfg.uses_files:
            assert cfg.counts_path is not None and cfg.hierarchy_path is not None
            x, h = load_counts(cfg.counts_path, cfg.hierarchy_path)
            context.metadata["source"] = str(cfg.counts_path)
            context.echo(f"  Counts: {cfg.counts_path}")
            context.echo(f"  Hierarchy: {cfg.hierarchy_path}")
        else:
            assert cfg.synth is not None
            x, h = synth_data(cfg.synth, cfg.seed)
            context.metadata["source"] = "synthetic"
            context.echo(
                f"  Synthetic: {cfg.synth.distribution}(mean={cfg.synth.mean:g}), "
                f"branching={cfg.synth.branching}"
            )

        context.data = x
        context.hierarchy = h
        context.invariant = bench_invariant(h, cfg.nonneg)
        context.echo(f"  Nodes: {h.size} ({len(h.leaves())} leaves, {h.depth} levels)")
        return context
