"""
Exception hierarchy shared by all nsfem modules.
"""
from __future__ import annotations

from typing import Any, Optional


class NsfemError(Exception):
    """Base class for every error raised by nsfem"""


class DomainError(NsfemError, ValueError):
    """Argument outside the mathematical domain of an operation"""


class NumericError(NsfemError):
    """A numerical sub-procedure (quadrature, root finding) failed"""

    def __init__(self, message: str, achieved: Optional[float] = None):
        super().__init__(message if achieved is None else f"{message} (achieved {achieved:.3e})")
        self.achieved = achieved


class MeshTopologyError(NsfemError):
    """Non-conforming or degenerate triangulation"""

    def __init__(self, message: str, edge: Optional[tuple[int, int]] = None):
        super().__init__(message if edge is None else f"{message}: edge {edge}")
        self.edge = edge


class DimensionMismatchError(NsfemError, ValueError):
    """Vector or matrix does not match the DOF layout"""

    def __init__(self, what: str, expected: int, got: int):
        super().__init__(f"{what}: expected length {expected}, got {got}")
        self.expected = expected
        self.got = got


class SingularMatrixError(NsfemError):
    """Sparse LU hit a zero pivot"""

    def __init__(self, message: str, row: Optional[int] = None):
        super().__init__(message if row is None else f"{message} (pivot row {row})")
        self.row = row


class NewtonConvergenceError(NsfemError):
    """Newton iteration did not reach the residual tolerance"""

    def __init__(self, message: str, stats: Any = None, p: Optional[float] = None):
        super().__init__(message if p is None else f"{message} at p={p:g}")
        self.stats = stats
        self.p = p


class StudyError(NsfemError):
    """A convergence study failed on a given mesh level"""

    def __init__(self, message: str, level: int):
        super().__init__(f"level {level}: {message}")
        self.level = level


class ConfigError(NsfemError, ValueError):
    """Invalid study configuration (usage error)"""
