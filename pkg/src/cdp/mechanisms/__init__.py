"""Additive noise mechanisms: calibration, sampling and densities."""

from cdp.mechanisms.noise import (
    InvalidSensitivityError,
    NoiseKind,
    NoiseSpec,
    PrivacyParams,
    QuerySpec,
    calibrate_gaussian,
    calibrate_laplace,
    density,
    log_density,
    sample_additive,
    sample_noise,
)

__all__ = [
    "InvalidSensitivityError",
    "NoiseKind",
    "NoiseSpec",
    "PrivacyParams",
    "QuerySpec",
    "calibrate_gaussian",
    "calibrate_laplace",
    "density",
    "log_density",
    "sample_additive",
    "sample_noise",
]
