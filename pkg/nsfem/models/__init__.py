"""
Models package exports.
"""
from .models import (
    FlowLaw,
    NewtonConfig,
    StepStats,
    SolveStats,
    RateTable,
    StudyConfig,
    LevelResult,
    StudyReport,
)
from .enums import BasisFamily, ElementPair, ConvectiveMode, PressureNorm, OutputFormat, parse_enum

__all__ = [
    "FlowLaw",
    "NewtonConfig",
    "StepStats",
    "SolveStats",
    "RateTable",
    "StudyConfig",
    "LevelResult",
    "StudyReport",
    "BasisFamily",
    "ElementPair",
    "ConvectiveMode",
    "PressureNorm",
    "OutputFormat",
    "parse_enum",
]
