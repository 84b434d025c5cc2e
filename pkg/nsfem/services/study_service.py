"""
Manufactured-solution convergence studies: exact fields, error norms,
experimental orders of convergence and the per-level driver.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import dblquad

from nsfem.core.config import settings
from nsfem.core.errors import DomainError, NewtonConvergenceError, NumericError, SingularMatrixError, StudyError
from nsfem.fem.assembly import DiscreteProblem, SystemState, manufactured_rhs
from nsfem.fem.mesh import chunkiness, mesh_hierarchy
from nsfem.fem.nfunctions import map_F, shifted_modular_density, sym, tensor_norm
from nsfem.fem.quadrature import triangle_quadrature
from nsfem.fem.spaces import (
    DofMap,
    build_spaces,
    cell_chunks,
    compatible_divergence_datum,
    interpolate_boundary,
    pressure_shapes,
    velocity_shapes,
)
from nsfem.models.enums import ConvectiveMode, PressureNorm
from nsfem.models.models import FlowLaw, LevelResult, RateTable, StudyConfig, StudyReport
from nsfem.services.newton_service import newton_service, prolongate_state

logger = logging.getLogger(__name__)

_ROTATION = np.array([[0.0, -1.0], [1.0, 0.0]])


@lru_cache(maxsize=None)
def q_mean_constant(gamma: float) -> float:
    """Mean of |x|^gamma over the unit square."""
    if not gamma > -2.0:
        raise DomainError(f"gamma must be > -2, got {gamma}")
    if gamma == 0.0:
        return 1.0
    value, abserr = dblquad(
        lambda y, x: (x * x + y * y) ** (0.5 * gamma),
        0.0, 1.0, 0.0, 1.0,
        epsabs=1e-12, epsrel=1e-12,
    )
    if abserr > 1e-10:
        raise NumericError(f"mean of |x|^{gamma} did not converge", abserr)
    return value


@dataclass(frozen=True)
class ManufacturedSolution:
    """v = |x|^beta (-y, x), q = |x|^gamma - <|.|^gamma> with gamma = 1 - 2/p' + beta."""
    p: float
    beta: float = settings.DEFAULT_BETA

    def __post_init__(self):
        if not self.p > 1.0:
            raise DomainError(f"p must be > 1, got {self.p}")

    @property
    def p_prime(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def gamma(self) -> float:
        return 1.0 - 2.0 / self.p_prime + self.beta

    @cached_property
    def q_mean(self) -> float:
        return q_mean_constant(self.gamma)

    def velocity(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.hypot(pts[:, 0], pts[:, 1])
        with np.errstate(divide="ignore"):
            scale = np.where(r > 0.0, r**self.beta, 0.0)
        return scale[:, None] * np.stack([-pts[:, 1], pts[:, 0]], axis=1)

    def evaluate(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(v, grad v, q) at points away from the origin."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.hypot(pts[:, 0], pts[:, 1])
        if np.any(r == 0.0):
            raise DomainError("exact fields are not defined at the origin")
        w = np.stack([-pts[:, 1], pts[:, 0]], axis=1)
        v = (r**self.beta)[:, None] * w
        grad = (self.beta * r ** (self.beta - 2.0))[:, None, None] * np.einsum("nk,nd->nkd", w, pts)
        grad += (r**self.beta)[:, None, None] * _ROTATION
        q = r**self.gamma - self.q_mean
        return v, grad, q


def exact_fields(ms: ManufacturedSolution, x) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """(v, grad v, Dv, q) at a single point x != 0."""
    v, grad, q = ms.evaluate(np.asarray(x, dtype=float)[None, :])
    return v[0], grad[0], sym(grad[0]), float(q[0])


# ---- error functionals ----

def _error_points(dofmap: DofMap, chunk: np.ndarray, degree: int):
    rule = triangle_quadrature(degree)
    pts = dofmap.geometry.map_points(rule.points, chunk)
    wd = dofmap.geometry.det[chunk][:, None] * rule.weights[None, :]
    return rule, pts, wd


def _velocity_gradients(dofmap: DofMap, state: SystemState, ms: ManufacturedSolution, degree: int):
    for chunk in cell_chunks(dofmap.mesh.n_cells):
        rule, pts, wd = _error_points(dofmap, chunk, degree)
        _, grads = velocity_shapes(dofmap, rule.points, chunk)
        gh = np.einsum("cnlkd,cl->cnkd", grads, state.v[dofmap.cell_velocity[chunk]])
        _, ge, _ = ms.evaluate(pts.reshape(-1, 2))
        yield wd, gh, ge.reshape(gh.shape)


def error_F(dofmap: DofMap, law: FlowLaw, state: SystemState, ms: ManufacturedSolution,
            degree: Optional[int] = None) -> float:
    """||F(Dv_h) - F(Dv)||_2."""
    degree = degree or settings.QUAD_DEGREE_ERROR
    total = 0.0
    for wd, gh, ge in _velocity_gradients(dofmap, state, ms, degree):
        diff = map_F(law, gh) - map_F(law, ge)
        total += float(np.einsum("cn,cnkd,cnkd->", wd, diff, diff))
    return math.sqrt(total)


def modular_F_error(dofmap: DofMap, law: FlowLaw, state: SystemState, ms: ManufacturedSolution,
                    degree: Optional[int] = None) -> float:
    """Shifted modular int phi_{|Dv|}(|Dv_h - Dv|) dx, comparable to e_F squared."""
    degree = degree or settings.QUAD_DEGREE_ERROR
    total = 0.0
    for wd, gh, ge in _velocity_gradients(dofmap, state, ms, degree):
        shift = tensor_norm(sym(ge))
        gap = tensor_norm(sym(gh) - sym(ge))
        total += float((wd * shifted_modular_density(law, shift, gap)).sum())
    return total


def pressure_integrals(dofmap: DofMap, state: SystemState, ms: ManufacturedSolution, degree: int):
    """Per chunk: weights, discrete and exact pressure at quadrature points."""
    rule = triangle_quadrature(degree)
    qvals = pressure_shapes(dofmap, rule.points)
    for chunk in cell_chunks(dofmap.mesh.n_cells):
        _, pts, wd = _error_points(dofmap, chunk, degree)
        qh = np.einsum("nm,cm->cn", qvals, state.q[dofmap.cell_pressure[chunk]])
        _, _, qe = ms.evaluate(pts.reshape(-1, 2))
        yield wd, qh, qe.reshape(qh.shape)


def error_pressure(dofmap: DofMap, state: SystemState, ms: ManufacturedSolution, norm: PressureNorm,
                   degree: Optional[int] = None) -> float:
    """Norm of the re-centered pressure difference, L^{p'} or L^2."""
    degree = degree or settings.QUAD_DEGREE_ERROR
    norm = PressureNorm(norm)
    exponent = ms.p_prime if norm is PressureNorm.LP_CONJUGATE else 2.0
    chunks = list(pressure_integrals(dofmap, state, ms, degree))
    area = sum(float(wd.sum()) for wd, _, _ in chunks)
    mean_h = sum(float((wd * qh).sum()) for wd, qh, _ in chunks) / area
    mean_e = sum(float((wd * qe).sum()) for wd, _, qe in chunks) / area
    total = 0.0
    for wd, qh, qe in chunks:
        total += float((wd * np.abs((qh - mean_h) - (qe - mean_e)) ** exponent).sum())
    return total ** (1.0 / exponent)


def pressure_mean(dofmap: DofMap, state: SystemState) -> float:
    rule = triangle_quadrature(settings.QUAD_DEGREE_LINEAR)
    qvals = pressure_shapes(dofmap, rule.points)
    qh = np.einsum("nm,cm->cn", qvals, state.q[dofmap.cell_pressure])
    return float(np.einsum("c,n,cn->", dofmap.geometry.det, rule.weights, qh))


def eoc(errors: Sequence[float], hs: Sequence[float]) -> List[float]:
    """Experimental orders of convergence between consecutive levels."""
    if len(errors) != len(hs):
        raise DomainError(f"errors and h differ in length ({len(errors)} vs {len(hs)})")
    if len(errors) < 2:
        raise DomainError("need at least two levels for an EOC")
    for i, e in enumerate(errors):
        if not e > 0.0:
            raise DomainError(f"error on level {i} is {e}; the solution is reproduced exactly")
    return [
        (math.log(errors[i + 1]) - math.log(errors[i])) / (math.log(hs[i + 1]) - math.log(hs[i]))
        for i in range(len(errors) - 1)
    ]


def theory_row(p: float) -> RateTable:
    return RateTable(p=p)


# ---- driver ----

class StudyService:
    """Runs one convergence study over the mesh hierarchy"""

    def level_problem_family(self, config: StudyConfig, dofmap: DofMap):
        """Boundary data, g1 and a p -> DiscreteProblem factory on one level."""
        mesh = dofmap.mesh
        ms = ManufacturedSolution(config.p, config.beta)
        g_b = interpolate_boundary(mesh, config.element, ms.velocity, dofmap=dofmap)
        g1 = compatible_divergence_datum(mesh, config.element, g_b)
        include_convection = config.convective is not ConvectiveMode.NONE
        base_law = config.law
        base = DiscreteProblem(
            dofmap=dofmap,
            law=base_law,
            mode=config.convective,
            rhs=np.zeros(dofmap.n_velocity),
            boundary=g_b.coefficients,
            g1=g1,
        )

        # the warm-start hint and the solve share the target-p problem
        @lru_cache(maxsize=1)
        def family(p: float) -> DiscreteProblem:
            law = base_law.with_p(p)
            rhs = manufactured_rhs(dofmap, ManufacturedSolution(p, config.beta), law, include_convection)
            return base.with_law(law, rhs)

        return family, g1

    def run_study(self, config: StudyConfig) -> StudyReport:
        report = StudyReport(config=config, rates=theory_row(config.p))
        ms = ManufacturedSolution(config.p, config.beta)
        law = config.law
        previous: Optional[SystemState] = None

        for mesh in mesh_hierarchy(config.levels):
            dofmap = build_spaces(mesh, config.element)
            family, g1 = self.level_problem_family(config, dofmap)
            try:
                hint = None
                if previous is not None:
                    hint = prolongate_state(previous, family(config.p))
                state, stats = newton_service.continuation_drive(family, config.p, config.newton, coarse_hint=hint)
                result = LevelResult(
                    level=mesh.level,
                    h=mesh.h,
                    diameter=mesh.diameter,
                    chunkiness=chunkiness(mesh),
                    ndof=dofmap.n_total,
                    newton_iters=stats.total_iterations,
                    e_F=error_F(dofmap, law, state, ms),
                    e_q_lp=error_pressure(dofmap, state, ms, PressureNorm.LP_CONJUGATE),
                    e_q_l2=error_pressure(dofmap, state, ms, PressureNorm.L2),
                    modular_F=modular_F_error(dofmap, law, state, ms),
                    g1h=g1,
                    multiplier=state.lam,
                    mean_q=pressure_mean(dofmap, state),
                    final_residual=stats.final_residual,
                    max_step_iters=max(s.iterations for s in stats.steps),
                    load_norm=float(np.abs(family(config.p).rhs).max()),
                )
            except (NewtonConvergenceError, SingularMatrixError, NumericError) as exc:
                raise StudyError(str(exc), mesh.level) from exc
            logger.info(
                "Level %d solved: ndof=%d newton=%d eF=%.3e eq_lp=%.3e eq_l2=%.3e",
                result.level, result.ndof, result.newton_iters, result.e_F, result.e_q_lp, result.e_q_l2,
            )
            report.levels.append(result)
            previous = state

        hs = [r.h for r in report.levels]
        report.eoc_F = _safe_eoc([r.e_F for r in report.levels], hs)
        report.eoc_lp = _safe_eoc([r.e_q_lp for r in report.levels], hs)
        report.eoc_l2 = _safe_eoc([r.e_q_l2 for r in report.levels], hs)
        return report


def _safe_eoc(errors: List[float], hs: List[float]) -> List[float]:
    """EOCs with NaN where a level reproduced the solution exactly."""
    out = []
    for i in range(len(errors) - 1):
        try:
            out.extend(eoc(errors[i:i + 2], hs[i:i + 2]))
        except DomainError:
            out.append(math.nan)
    return out


study_service = StudyService()


def run_study(config: StudyConfig) -> StudyReport:
    return study_service.run_study(config)
