"""
Core package exports.
"""
from .config import settings
from .errors import (
    NsfemError,
    DomainError,
    NumericError,
    MeshTopologyError,
    DimensionMismatchError,
    SingularMatrixError,
    NewtonConvergenceError,
    StudyError,
    ConfigError,
)

__all__ = [
    "settings",
    "NsfemError",
    "DomainError",
    "NumericError",
    "MeshTopologyError",
    "DimensionMismatchError",
    "SingularMatrixError",
    "NewtonConvergenceError",
    "StudyError",
    "ConfigError",
]
