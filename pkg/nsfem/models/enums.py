"""
Enums used throughout the solver.
"""
from enum import Enum
from typing import Type, TypeVar


class ElementPair(str, Enum):
    """Velocity/pressure pair together with its Raviart-Thomas reconstruction space"""
    BR1_P0 = "br1"
    P2_P0 = "p2p0"
    CCR_P1DG = "ccr"

    @property
    def velocity_degree(self) -> int:
        return 1 if self is ElementPair.BR1_P0 else 2

    @property
    def has_edge_bubbles(self) -> bool:
        return self is ElementPair.BR1_P0

    @property
    def has_cell_bubble(self) -> bool:
        return self is ElementPair.CCR_P1DG

    @property
    def pressure_degree(self) -> int:
        return 1 if self is ElementPair.CCR_P1DG else 0

    @property
    def recon_degree(self) -> int:
        # RT_k with k equal to the pressure degree, so that div Z_h = Y_h
        return self.pressure_degree


class BasisFamily(str, Enum):
    """Shape function families on the reference triangle"""
    P1 = "p1"
    P2 = "p2"
    CELL_BUBBLE = "cell_bubble"
    EDGE_BUBBLE_NORMAL = "edge_bubble_normal"
    P0 = "p0"
    P1DG = "p1dg"
    RT0 = "rt0"
    RT1 = "rt1"

    @property
    def is_vector(self) -> bool:
        return self in (BasisFamily.RT0, BasisFamily.RT1)


class ConvectiveMode(str, Enum):
    """Discrete convective term"""
    RECONSTRUCTION = "reconstruction"
    TEMAM = "temam"
    NONE = "none"


class PressureNorm(str, Enum):
    LP_CONJUGATE = "lp'"
    L2 = "l2"


class OutputFormat(str, Enum):
    CSV = "csv"
    MD = "md"
    PARQUET = "parquet"


E = TypeVar("E", bound=Enum)


def parse_enum(enum_cls: Type[E], raw: str) -> E:
    """Parse an enum value in a case-insensitive way.

    Accepts either the member name (e.g. "CCR_P1DG") or the value (e.g. "ccr").
    Raises ValueError listing valid options if not found.
    """
    if raw is None:
        raise ValueError(f"Missing value for {enum_cls.__name__}")
    lower = str(raw).strip().lower()
    for member in enum_cls:
        if str(member.value).lower() == lower or member.name.lower() == lower:
            return member
    valid = ", ".join(str(m.value) for m in enum_cls)
    raise ValueError(f"Invalid {enum_cls.__name__} '{raw}'. Valid: {valid}")
