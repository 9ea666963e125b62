"""Pseudospectral laboratory for the logarithmic Schroedinger equation with spatial white noise."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    DivergenceError,
    ParameterError,
    SlognlsError,
    StatisticalPowerError,
    StructuralError,
)
from .grid import Field, GridSpec  # noqa: E402

__all__ = [
    "__version__",
    "ConfigError",
    "DivergenceError",
    "Field",
    "GridSpec",
    "ParameterError",
    "SlognlsError",
    "StatisticalPowerError",
    "StructuralError",
]
