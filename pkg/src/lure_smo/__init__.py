"""Sliding-mode observers for set-valued Lur'e systems."""

from ._accel import NUMBA_ENABLED
from .errors import (
    ConfigError,
    DimensionError,
    DivergenceError,
    NonConvergenceError,
    ParameterError,
    SingularityError,
)

__version__ = "0.1.0"
