"""Impulse-response kernels of dispersive dielectric bodies.

Thin re-export of the native extension; see ``run`` for the batch commands.
"""

from ._dqed import (
    SCHEMA_VERSION,
    ConfigError,
    DqedError,
    NumericError,
    ValidationError,
    ball_spectrum,
    infinite_medium_transfer,
    normalize_config,
    run,
    small_size_impulse,
    sphere_kappa_longitudinal,
    susceptibility,
)

__all__ = [
    "SCHEMA_VERSION",
    "ConfigError",
    "DqedError",
    "NumericError",
    "ValidationError",
    "ball_spectrum",
    "infinite_medium_transfer",
    "normalize_config",
    "run",
    "small_size_impulse",
    "sphere_kappa_longitudinal",
    "susceptibility",
]
