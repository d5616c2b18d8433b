"""Configuration module."""

from cdp.config.settings import (
    ConfigError,
    ExperimentConfig,
    InvalidSpecError,
    SamplerSettings,
    SynthSpec,
    load_config,
    worker_threads,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "InvalidSpecError",
    "SamplerSettings",
    "SynthSpec",
    "load_config",
    "worker_threads",
]
