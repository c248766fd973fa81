"""Isotropic Gaussian random fields on the sphere and on sphere x line."""

from .errors import (
    ConfigError,
    DivergenceError,
    DomainError,
    NotPSDError,
    QuadratureError,
    TruncationError,
    UnsupportedDimensionError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DivergenceError",
    "DomainError",
    "NotPSDError",
    "QuadratureError",
    "TruncationError",
    "UnsupportedDimensionError",
]
