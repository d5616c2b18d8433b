"""Configuration dataclasses for the benchmark harness."""

import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import yaml

from cdp.core.errors import CDPError

# Privacy budgets swept when a config does not name any
DEFAULT_EPSILONS = (0.5, 1.0, 2.0)

# Releases the harness knows how to produce
MECHANISMS = ("mh", "topdown", "image", "rejection")

# How an MH run becomes a release: one post-burn-in draw (the conditioned
# mechanism) or the mean of a chain (exploratory, not the same mechanism)
RELEASE_MODES = ("draw", "chain_mean")

# Leaf count laws for synthetic data
DISTRIBUTIONS = ("poisson", "nbinom")

TABLE_FORMATS = ("csv", "json", "dat")

# Environment variable capping worker threads
THREADS_ENV = "CDP_THREADS"


class ConfigError(CDPError, ValueError):
    """Raised for malformed or inconsistent experiment configurations."""


class InvalidSpecError(ConfigError):
    """Raised for an unusable synthetic data specification."""


def _reject_unknown(cls: type, data: Mapping[str, Any], where: str) -> None:
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}; expected a subset of {sorted(known)}")


@dataclass
class SynthSpec:
    """Shape and count law of a synthetic hierarchy.

    Attributes:
        levels: Number of levels including the root.
        branching: Children per node on each non-leaf level, top first;
            ``levels - 1`` entries.
        mean: Mean leaf count.
        distribution: ``poisson`` or ``nbinom`` (negative binomial with the
            same mean).
        dispersion: Negative binomial size parameter; smaller is more
            over-dispersed. Ignored for ``poisson``.
    """

    levels: int = 3
    branching: List[int] = field(default_factory=lambda: [6, 4])
    mean: float = 1000.0
    distribution: str = "poisson"
    dispersion: float = 10.0

    def __post_init__(self) -> None:
        self.branching = [int(k) for k in self.branching]
        if self.levels < 1:
            raise InvalidSpecError(f"levels must be >= 1, got {self.levels}")
        if len(self.branching) != self.levels - 1:
            raise InvalidSpecError(
                f"{self.levels} levels need {self.levels - 1} branching factors, got {self.branching}"
            )
        if any(k < 1 for k in self.branching):
            raise InvalidSpecError(f"branching factors must be >= 1, got {self.branching}")
        if not self.mean > 0:
            raise InvalidSpecError(f"mean leaf count must be positive, got {self.mean}")
        if self.distribution not in DISTRIBUTIONS:
            raise InvalidSpecError(
                f"distribution must be one of {list(DISTRIBUTIONS)}, got {self.distribution!r}"
            )
        if not self.dispersion > 0:
            raise InvalidSpecError(f"dispersion must be positive, got {self.dispersion}")

    @property
    def leaf_count(self) -> int:
        total = 1
        for k in self.branching:
            total *= k
        return total

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SynthSpec":
        _reject_unknown(cls, data, "synth")
        return cls(**data)


@dataclass
class SamplerSettings:
    """MH settings used for ``mh`` releases.

    Attributes:
        burn_in: Iterations discarded before the released draw.
        thinning: Keep every ``thinning``-th state (chain-mean mode).
        chain_draws: Draws averaged in chain-mean mode.
        proposal_scale: Random-walk step; ``None`` scales with the noise.
        density_mode: ``full`` or ``leaf`` target density.
    """

    burn_in: int = 2000
    thinning: int = 1
    chain_draws: int = 1000
    proposal_scale: Optional[float] = None
    density_mode: str = "full"

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SamplerSettings":
        _reject_unknown(cls, data, "mh")
        return cls(**data)


@dataclass
class ExperimentConfig:
    """Main configuration for a benchmark sweep.

    Attributes:
        epsilons: Privacy budgets, each strictly positive.
        mechanisms: Releases to compare; a subset of ``MECHANISMS``.
        repetitions: Releases per (epsilon, mechanism) pair.
        seed: Root seed; every cell derives its own stream from it.
        hierarchy_path: Hierarchy CSV (with ``counts_path``).
        counts_path: Leaf counts CSV (with ``hierarchy_path``).
        synth: Synthetic data spec, used when no data files are given.
        release_mode: ``draw`` or ``chain_mean`` for MH releases.
        nonneg: Add ``x >= 0`` to the invariant for ``mh``, ``image`` and
            ``rejection``.
        zero_noise: Testing hook; every release equals the confidential data.
        mh: Sampler settings for ``mh`` releases.
        threads: Worker cap; ``None`` reads ``CDP_THREADS`` or uses the CPU count.
        formats: Table renditions written next to the CSV.
        verbose: Print stage progress.
        resume: Continue from a checkpoint in the output directory.
    """

    epsilons: List[float] = field(default_factory=lambda: list(DEFAULT_EPSILONS))
    mechanisms: List[str] = field(default_factory=lambda: ["mh", "topdown"])
    repetitions: int = 20
    seed: int = 0
    hierarchy_path: Optional[Path] = None
    counts_path: Optional[Path] = None
    synth: Optional[SynthSpec] = None
    release_mode: str = "draw"
    nonneg: bool = False
    zero_noise: bool = False
    mh: SamplerSettings = field(default_factory=SamplerSettings)
    threads: Optional[int] = None
    formats: List[str] = field(default_factory=lambda: ["csv", "json"])
    verbose: bool = True
    resume: bool = False

    def __post_init__(self) -> None:
        self.epsilons = [float(e) for e in self.epsilons]
        self.mechanisms = list(self.mechanisms)
        if not self.epsilons:
            raise ConfigError("epsilons must not be empty")
        bad = [e for e in self.epsilons if not e > 0]
        if bad:
            raise ConfigError(f"epsilons must be positive, got {bad}")
        if len(set(self.epsilons)) != len(self.epsilons):
            raise ConfigError(f"duplicate epsilons in {self.epsilons}")
        unknown = [m for m in self.mechanisms if m not in MECHANISMS]
        if unknown:
            raise ConfigError(f"unknown mechanisms {unknown}; choose from {list(MECHANISMS)}")
        if len(set(self.mechanisms)) != len(self.mechanisms):
            raise ConfigError(f"duplicate mechanisms in {self.mechanisms}")
        if self.repetitions < 1:
            raise ConfigError(f"repetitions must be >= 1, got {self.repetitions}")
        if self.release_mode not in RELEASE_MODES:
            raise ConfigError(f"release_mode must be one of {list(RELEASE_MODES)}, got {self.release_mode!r}")
        if (self.hierarchy_path is None) != (self.counts_path is None):
            raise ConfigError("hierarchy_path and counts_path must be given together")
        if self.hierarchy_path is None and self.synth is None:
            self.synth = SynthSpec()
        bad_formats = [f for f in self.formats if f not in TABLE_FORMATS]
        if bad_formats:
            raise ConfigError(f"unknown table formats {bad_formats}; choose from {list(TABLE_FORMATS)}")
        if self.threads is not None and self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")

    @property
    def uses_files(self) -> bool:
        return self.counts_path is not None

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], base_dir: Optional[Path] = None) -> "ExperimentConfig":
        """Build a config from parsed JSON/YAML; relative paths resolve against ``base_dir``.

        Raises:
            ConfigError: On unknown keys or invalid values.
        """
        if not isinstance(data, Mapping):
            raise ConfigError(f"config must be a mapping, got {type(data).__name__}")
        _reject_unknown(cls, data, "config")
        values = dict(data)
        for key in ("hierarchy_path", "counts_path"):
            if values.get(key) is not None:
                path = Path(values[key])
                if base_dir is not None and not path.is_absolute():
                    path = base_dir / path
                values[key] = path
        if values.get("synth") is not None:
            values["synth"] = SynthSpec.from_dict(values["synth"])
        if values.get("mh") is not None:
            values["mh"] = SamplerSettings.from_dict(values["mh"])
        try:
            return cls(**values)
        except TypeError as e:
            raise ConfigError(str(e)) from e

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        for key in ("hierarchy_path", "counts_path"):
            if data[key] is not None:
                data[key] = str(data[key])
        return data

    def fingerprint(self) -> Dict[str, Any]:
        """Fields that determine the table; a checkpoint is reused only when they match."""
        data = self.to_dict()
        for key in ("threads", "formats", "verbose", "resume"):
            data.pop(key)
        return data


def load_config(path: Path) -> ExperimentConfig:
    """Read a JSON or YAML experiment config.

    Raises:
        ConfigError: If the file cannot be parsed or holds invalid settings.
    """
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: {e}") from e
    return ExperimentConfig.from_dict(data or {}, base_dir=path.parent)


def worker_threads(config: ExperimentConfig) -> int:
    """Worker count: the config value, else ``CDP_THREADS``, else the CPU count.

    Raises:
        ConfigError: If ``CDP_THREADS`` is not a positive integer.
    """
    if config.threads is not None:
        return config.threads
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            value = int(raw)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
        if value < 1:
            raise ConfigError(f"{THREADS_ENV} must be >= 1, got {value}")
        return value
    return os.cpu_count() or 1
