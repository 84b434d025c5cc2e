"""
Data models for the generalized Navier-Stokes solver.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

from nsfem.core.config import settings
from nsfem.core.errors import ConfigError, DomainError
from nsfem.models.enums import ConvectiveMode, ElementPair, OutputFormat


@dataclass(frozen=True)
class FlowLaw:
    """Parameters (p, delta, nu0) of the power-law extra stress"""
    p: float
    delta: float = settings.DEFAULT_DELTA
    nu0: float = settings.DEFAULT_NU0

    def __post_init__(self):
        if not self.p > 1.0:
            raise DomainError(f"shear exponent p must be > 1, got {self.p}")
        if not self.delta >= 0.0:
            raise DomainError(f"regularization delta must be >= 0, got {self.delta}")
        if not self.nu0 > 0.0:
            raise DomainError(f"viscosity scale nu0 must be > 0, got {self.nu0}")

    def with_p(self, p: float) -> "FlowLaw":
        return FlowLaw(p=p, delta=self.delta, nu0=self.nu0)


@dataclass(frozen=True)
class NewtonConfig:
    """Damped Newton settings with a continuation path in p"""
    abs_tol: float = settings.NEWTON_ABS_TOL
    max_iters: int = settings.NEWTON_MAX_ITERS
    damping: float = 0.5
    max_halvings: int = settings.NEWTON_MAX_HALVINGS
    continuation_start: float = settings.CONTINUATION_START
    continuation_step: float = settings.CONTINUATION_STEP
    continuation: Optional[tuple] = None  # explicit path overrides start/step
    verbose: bool = False

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise DomainError("abs_tol must be > 0")
        if self.max_iters < 1:
            raise DomainError("max_iters must be >= 1")
        if not self.continuation_step > 0:
            raise DomainError("continuation_step must be > 0")

    def continuation_path(self, target: float) -> List[float]:
        """Strictly decreasing list of p values ending at target."""
        if self.continuation is not None:
            path = [float(v) for v in self.continuation]
            if not path or abs(path[-1] - target) > 1e-12:
                raise DomainError("continuation path must end at the target p")
            if any(b >= a for a, b in zip(path, path[1:])):
                raise DomainError("continuation path must be strictly decreasing")
            return path
        if target >= self.continuation_start:
            return [target]
        path = []
        k = 0
        while True:
            value = round(self.continuation_start - k * self.continuation_step, 12)
            if value <= target + 1e-12:
                break
            path.append(value)
            k += 1
        path.append(target)
        return path


@dataclass
class StepStats:
    """Newton history for one continuation step"""
    p: float
    iterations: int = 0
    residuals: List[float] = field(default_factory=list)
    alphas: List[float] = field(default_factory=list)
    damping_events: int = 0
    converged: bool = False

    @property
    def final_residual(self) -> float:
        return self.residuals[-1] if self.residuals else math.inf


@dataclass
class SolveStats:
    """Statistics of a (continued) Newton solve"""
    steps: List[StepStats] = field(default_factory=list)
    fill_ratio: float = 0.0  # nnz(L+U) / nnz(A) of the last factorization
    refinement_steps: int = 0

    @property
    def total_iterations(self) -> int:
        return sum(s.iterations for s in self.steps)

    @property
    def final_residual(self) -> float:
        return self.steps[-1].final_residual if self.steps else math.inf


@dataclass(frozen=True)
class RateTable:
    """Exponents and theoretical convergence rates for a shear exponent p (d = 2)"""
    p: float

    @property
    def p_prime(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def p_star(self) -> float:
        return 2.0 * self.p / (2.0 - self.p) if self.p < 2.0 else math.inf

    @property
    def s(self) -> float:
        half = self.p_star / 2.0
        conj = 1.0 if math.isinf(half) else half / (half - 1.0)
        return max(self.p, conj)

    @property
    def r(self) -> float:
        return min(2.0, self.p)

    @property
    def ell(self) -> float:
        return max(2.0, self.p, self.s)

    @property
    def velocity_rate(self) -> float:
        return 1.0

    @property
    def pressure_lp_rate(self) -> Optional[float]:
        return 2.0 / self.p_prime if self.p <= 2.0 else None

    @property
    def pressure_l2_rate(self) -> Optional[float]:
        return 1.0 if self.p <= 2.0 else None


@dataclass
class StudyConfig:
    """One convergence study (a single CLI invocation)"""
    p: float
    delta: float = settings.DEFAULT_DELTA
    nu0: float = settings.DEFAULT_NU0
    element: ElementPair = ElementPair.CCR_P1DG
    convective: ConvectiveMode = ConvectiveMode.RECONSTRUCTION
    levels: int = settings.MAX_CI_LEVEL
    beta: float = settings.DEFAULT_BETA
    out: Optional[str] = None
    fmt: OutputFormat = OutputFormat.CSV
    full_tables: bool = False
    verbose: bool = False
    newton: NewtonConfig = field(default_factory=NewtonConfig)

    def __post_init__(self):
        if not self.p > 1.0:
            raise ConfigError(f"p must be > 1, got {self.p}")
        if self.levels < 1:
            raise ConfigError(f"levels must be >= 1, got {self.levels}")
        limit = settings.MAX_FULL_TABLES_LEVEL if self.full_tables else settings.MAX_CI_LEVEL
        if self.levels > limit:
            hint = "" if self.full_tables else " (use --full-tables)"
            raise ConfigError(f"levels must be <= {limit}{hint}, got {self.levels}")
        if not self.delta >= 0.0:
            raise ConfigError(f"delta must be >= 0, got {self.delta}")
        if not self.nu0 > 0.0:
            raise ConfigError(f"nu0 must be > 0, got {self.nu0}")

    @property
    def law(self) -> FlowLaw:
        return FlowLaw(p=self.p, delta=self.delta, nu0=self.nu0)

    @property
    def temam_admissible(self) -> bool:
        # p >= 2d/(d+1) with d = 2
        return self.p >= 4.0 / 3.0 - 1e-12


@dataclass
class LevelResult:
    """Errors and diagnostics on one mesh level"""
    level: int
    h: float
    diameter: float
    chunkiness: float
    ndof: int
    newton_iters: int
    e_F: float
    e_q_lp: float
    e_q_l2: float
    modular_F: float = math.nan
    g1h: float = 0.0
    multiplier: float = 0.0
    mean_q: float = 0.0
    final_residual: float = math.nan
    max_step_iters: int = 0  # most Newton iterations in one continuation step
    load_norm: float = 0.0  # max-norm of the discrete load vector


@dataclass
class StudyReport:
    """Per-level errors, EOCs and the theory row of one study"""
    config: StudyConfig
    rates: RateTable
    levels: List[LevelResult] = field(default_factory=list)
    eoc_F: List[float] = field(default_factory=list)
    eoc_lp: List[float] = field(default_factory=list)
    eoc_l2: List[float] = field(default_factory=list)
