"""
Sparse direct solves and damped Newton iteration with continuation in p.
"""
from __future__ import annotations

import logging
import sys
from dataclasses import dataclass
from typing import Callable, Optional, TextIO, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from nsfem.core.config import settings
from nsfem.core.errors import DimensionMismatchError, NewtonConvergenceError, SingularMatrixError
from nsfem.fem.assembly import (
    DiscreteProblem,
    SystemState,
    apply_boundary,
    assemble_jacobian,
    assemble_residual,
)
from nsfem.fem.spaces import DofMap, fortin_of_velocity, prolongate_pressure, prolongate_velocity
from nsfem.models.enums import ConvectiveMode
from nsfem.models.models import NewtonConfig, SolveStats, StepStats

logger = logging.getLogger(__name__)
# bare `step p iter |R|_2 alpha` lines of verbose solves
iteration_logger = logging.getLogger(f"{__name__}.iterations")

ProblemFamily = Callable[[float], DiscreteProblem]


@dataclass
class LuFactor:
    matrix: sp.csc_matrix
    lu: object  # scipy SuperLU

    @property
    def fill_ratio(self) -> float:
        nnz = max(self.matrix.nnz, 1)
        return (self.lu.L.nnz + self.lu.U.nnz) / nnz


def factorize(A: sp.spmatrix) -> LuFactor:
    """Unsymmetric sparse LU with COLAMD column ordering and partial pivoting."""
    A = sp.csc_matrix(A, dtype=float)
    n_rows, n_cols = A.shape
    if n_rows != n_cols:
        raise DimensionMismatchError("square system matrix", n_rows, n_cols)
    A.eliminate_zeros()
    empty_rows = np.flatnonzero(np.diff(A.tocsr().indptr) == 0)
    if empty_rows.size:
        raise SingularMatrixError("matrix has a zero row", int(empty_rows[0]))
    empty_cols = np.flatnonzero(np.diff(A.indptr) == 0)
    if empty_cols.size:
        raise SingularMatrixError(f"matrix has a zero column {int(empty_cols[0])}")
    try:
        lu = splu(A, permc_spec="COLAMD")
    except RuntimeError as exc:
        raise SingularMatrixError(f"sparse LU failed: {exc}") from exc
    diag = lu.U.diagonal()
    dead = np.flatnonzero(~np.isfinite(diag) | (diag == 0.0))
    if dead.size:
        row = int(np.flatnonzero(lu.perm_r == dead[0])[0])
        raise SingularMatrixError("zero pivot in sparse LU", row)
    return LuFactor(matrix=A, lu=lu)


def solve_factored(factor: LuFactor, b: np.ndarray) -> Tuple[np.ndarray, int, float]:
    """Solve with iterative refinement; returns (x, refinement steps, relative residual)."""
    b = np.asarray(b, dtype=float)
    if b.shape != (factor.matrix.shape[0],):
        raise DimensionMismatchError("right-hand side", factor.matrix.shape[0], b.size)
    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        return np.zeros_like(b), 0, 0.0
    x = factor.lu.solve(b)
    rel = np.linalg.norm(b - factor.matrix @ x) / b_norm
    steps = 0
    while rel > settings.LU_RESIDUAL_TOL and steps < settings.LU_REFINEMENT_STEPS:
        x = x + factor.lu.solve(b - factor.matrix @ x)
        rel = np.linalg.norm(b - factor.matrix @ x) / b_norm
        steps += 1
    if rel > settings.LU_RESIDUAL_TOL:
        logger.warning("LU relative residual %.3e above %.0e after %d refinement steps",
                       rel, settings.LU_RESIDUAL_TOL, steps)
    return x, steps, rel


def sparse_lu_solve(A: sp.spmatrix, b: np.ndarray) -> np.ndarray:
    x, _, _ = solve_factored(factorize(A), b)
    return x


def configure_iteration_log(stream: Optional[TextIO] = None) -> logging.Handler:
    """Send iteration lines to stream (stderr by default) without timestamp or level prefix."""
    for old in list(iteration_logger.handlers):
        iteration_logger.removeHandler(old)
    handler = logging.StreamHandler(stream if stream is not None else sys.stderr)
    handler.setFormatter(logging.Formatter("%(message)s"))
    iteration_logger.addHandler(handler)
    iteration_logger.setLevel(logging.INFO)
    iteration_logger.propagate = False
    return handler


def prolongate_state(coarse: SystemState, problem: DiscreteProblem) -> SystemState:
    """Warm start on a refined mesh: interpolated v and q, Fortin z, lambda = 0."""
    fine: DofMap = problem.dofmap
    v = prolongate_velocity(coarse.dofmap, fine, coarse.v)
    q = prolongate_pressure(coarse.dofmap, fine, coarse.q)
    state = SystemState(fine, v, np.zeros(fine.n_recon), q, 0.0)
    apply_boundary(problem, state)
    if problem.mode is ConvectiveMode.RECONSTRUCTION:
        state.z = fortin_of_velocity(fine, state.v)
    return state


class NewtonService:
    """Damped Newton solves of the augmented system"""

    @staticmethod
    def _newton_direction(problem: DiscreteProblem, state: SystemState, residual: np.ndarray,
                          solve_stats: Optional[SolveStats]) -> np.ndarray:
        # the LU factor dies with this frame, so two factors never coexist
        factor = factorize(assemble_jacobian(problem, state))
        direction, refinements, _ = solve_factored(factor, -residual)
        if solve_stats is not None:
            solve_stats.fill_ratio = factor.fill_ratio
            solve_stats.refinement_steps += refinements
        return direction

    def newton_solve(
        self,
        problem: DiscreteProblem,
        config: NewtonConfig,
        initial: SystemState,
        step: int = 0,
        solve_stats: Optional[SolveStats] = None,
    ) -> Tuple[SystemState, StepStats]:
        p = problem.law.p
        stats = StepStats(p=p)
        dm = problem.dofmap
        x = initial.to_vector()
        residual = assemble_residual(problem, initial)
        norm = float(np.linalg.norm(residual))
        stats.residuals.append(norm)
        if config.verbose:
            iteration_logger.info("%d %g %d %.6e %s", step, p, 0, norm, "-")

        while norm > config.abs_tol:
            if stats.iterations >= config.max_iters:
                raise NewtonConvergenceError(
                    f"no convergence in {config.max_iters} iterations (|R| = {norm:.3e})", stats, p
                )
            direction = self._newton_direction(problem, SystemState.from_vector(dm, x), residual, solve_stats)

            alpha = 1.0
            for _ in range(config.max_halvings + 1):
                trial = x + alpha * direction
                trial_residual = assemble_residual(problem, SystemState.from_vector(dm, trial))
                trial_norm = float(np.linalg.norm(trial_residual))
                if trial_norm < norm:
                    break
                alpha *= config.damping
            else:
                raise NewtonConvergenceError(
                    f"backtracking exhausted after {config.max_halvings} halvings (|R| = {norm:.3e})", stats, p
                )

            x, residual, norm = trial, trial_residual, trial_norm
            stats.iterations += 1
            stats.residuals.append(norm)
            stats.alphas.append(alpha)
            if alpha < 1.0:
                stats.damping_events += 1
            if config.verbose:
                iteration_logger.info("%d %g %d %.6e %g", step, p, stats.iterations, norm, alpha)

        stats.converged = True
        return SystemState.from_vector(dm, x), stats

    def continuation_drive(
        self,
        family: ProblemFamily,
        target_p: float,
        config: NewtonConfig,
        coarse_hint: Optional[SystemState] = None,
    ) -> Tuple[SystemState, SolveStats]:
        """Solve along the continuation path in p, warm-starting each step.

        With a coarse_hint (a prolongated coarse solution) the path collapses to
        the target p.
        """
        path = [target_p] if coarse_hint is not None else config.continuation_path(target_p)
        solve_stats = SolveStats()
        state = coarse_hint
        for step, p in enumerate(path):
            problem = family(p)
            if state is None:
                state = problem.initial_state()
            else:
                state = apply_boundary(problem, SystemState(problem.dofmap, state.v.copy(), state.z.copy(), state.q.copy(), state.lam))
            state, stats = self.newton_solve(problem, config, state, step=step, solve_stats=solve_stats)
            solve_stats.steps.append(stats)
            logger.debug("Continuation step %d at p=%g converged in %d iterations", step, p, stats.iterations)
        return state, solve_stats


newton_service = NewtonService()
