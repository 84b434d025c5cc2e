import io
import re
import sys
import weakref

import numpy as np
import pytest
import scipy.sparse as sp

from nsfem.core.errors import DimensionMismatchError, NewtonConvergenceError, SingularMatrixError
from nsfem.fem.assembly import DiscreteProblem, SystemState, assemble_residual
from nsfem.fem.elements import LAMBDA_GRADS, cell_geometry
from nsfem.fem.mesh import mesh_hierarchy
from nsfem.fem.spaces import build_spaces, interpolate_velocity, recon_moment_matrix, velocity_moment_matrix
from nsfem.models.enums import ConvectiveMode, ElementPair
from nsfem.models.models import FlowLaw, NewtonConfig, StudyConfig
from nsfem.services.newton_service import (
    configure_iteration_log,
    factorize,
    iteration_logger,
    newton_service,
    prolongate_state,
    solve_factored,
    sparse_lu_solve,
)
from nsfem.services.study_service import study_service

# the package re-exports the service singleton under the module name
newton_module = sys.modules["nsfem.services.newton_service"]


def p1_laplacian(m):
    """Stiffness matrix and load (f = 1) of the P1 Laplacian with homogeneous Dirichlet rows."""
    geometry = cell_geometry(m)
    grads = np.einsum("cij,lj->cli", geometry.jac_inv_t, LAMBDA_GRADS)
    local = 0.5 * geometry.det[:, None, None] * np.einsum("cld,ckd->clk", grads, grads)
    rows = np.repeat(m.triangles, 3, axis=1).ravel()
    cols = np.tile(m.triangles, (1, 3)).ravel()
    A = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(m.n_vertices,) * 2).tocsr()
    b = np.bincount(m.triangles.ravel(), weights=np.repeat(geometry.det / 6.0, 3), minlength=m.n_vertices)
    fixed = np.zeros(m.n_vertices)
    fixed[m.topology.boundary_vertices] = 1.0
    A = (sp.diags(1.0 - fixed) @ A + sp.diags(fixed)).tocsr()
    b[m.topology.boundary_vertices] = 0.0
    return A, b


class TestSparseLu:
    def test_identity(self, rng):
        b = rng.normal(size=7)
        np.testing.assert_allclose(sparse_lu_solve(sp.identity(7, format="csr"), b), b, rtol=1e-15)

    def test_zero_row_is_reported(self, rng):
        A = sp.diags(rng.uniform(1.0, 2.0, size=6)).tolil()
        A[2, 4] = 0.3
        A[3, 3] = 0.0
        with pytest.raises(SingularMatrixError) as excinfo:
            factorize(A.tocsr())
        assert excinfo.value.row == 3

    def test_non_square(self):
        with pytest.raises(DimensionMismatchError):
            factorize(sp.csr_matrix(np.ones((2, 3))))

    def test_rhs_size(self):
        factor = factorize(sp.identity(3, format="csc"))
        with pytest.raises(DimensionMismatchError):
            solve_factored(factor, np.ones(4))

    def test_p1_laplacian_residual(self, level2_mesh):
        A, b = p1_laplacian(level2_mesh)
        x, _, rel = solve_factored(factorize(A), b)
        assert rel < 1e-11
        assert np.linalg.norm(A @ x - b) / np.linalg.norm(b) < 1e-11
        assert x.max() > 0.0

    def test_fill_ratio(self, level2_mesh):
        A, _ = p1_laplacian(level2_mesh)
        assert factorize(A).fill_ratio >= 1.0


class TestNewton:
    def test_stokes_patch_converges_in_one_step(self, level1_mesh, patch_factory):
        problem, _, expected = patch_factory(level1_mesh)
        state, stats = newton_service.newton_solve(problem, NewtonConfig(), problem.initial_state())
        assert stats.converged
        assert stats.iterations == 1
        np.testing.assert_allclose(state.v, expected.v, atol=1e-10)
        np.testing.assert_allclose(state.q, expected.q, atol=1e-10)
        assert abs(state.lam) < 1e-10

    def test_zero_data_stays_at_zero(self, level1_mesh, shear_thinning_law):
        dm = build_spaces(level1_mesh, ElementPair.BR1_P0)
        zeros = np.zeros(dm.n_velocity)
        problem = DiscreteProblem(dm, shear_thinning_law, ConvectiveMode.RECONSTRUCTION, rhs=zeros, boundary=zeros)
        state, stats = newton_service.newton_solve(problem, NewtonConfig(), problem.initial_state())
        assert stats.converged
        assert stats.iterations <= 1
        assert not state.to_vector().any()

    def test_dirichlet_values_preserved(self, level1_mesh):
        config = StudyConfig(p=1.5, element=ElementPair.P2_P0, convective=ConvectiveMode.TEMAM, levels=1)
        dm = build_spaces(level1_mesh, config.element)
        family, _ = study_service.level_problem_family(config, dm)
        problem = family(2.0)
        state, _ = newton_service.newton_solve(problem, NewtonConfig(), problem.initial_state())
        np.testing.assert_allclose(state.v[dm.dirichlet], problem.boundary[dm.dirichlet], atol=1e-12)

    def test_iteration_limit(self, level1_mesh):
        config = StudyConfig(p=1.5, element=ElementPair.BR1_P0, levels=1)
        dm = build_spaces(level1_mesh, config.element)
        family, _ = study_service.level_problem_family(config, dm)
        problem = family(1.5)
        with pytest.raises(NewtonConvergenceError) as excinfo:
            newton_service.newton_solve(problem, NewtonConfig(max_iters=1), problem.initial_state())
        assert excinfo.value.p == 1.5
        assert excinfo.value.stats.residuals

    def test_residual_history_decreases(self, level1_mesh):
        config = StudyConfig(p=2.0, element=ElementPair.CCR_P1DG, levels=1)
        dm = build_spaces(level1_mesh, config.element)
        family, _ = study_service.level_problem_family(config, dm)
        problem = family(2.0)
        _, stats = newton_service.newton_solve(problem, NewtonConfig(), problem.initial_state())
        assert all(b < a for a, b in zip(stats.residuals, stats.residuals[1:]))
        assert stats.final_residual <= NewtonConfig().abs_tol
        assert len(stats.alphas) == stats.iterations

    def test_previous_lu_factor_is_released(self, level1_mesh, monkeypatch):
        config = StudyConfig(p=2.0, element=ElementPair.CCR_P1DG, levels=1)
        dm = build_spaces(level1_mesh, config.element)
        family, _ = study_service.level_problem_family(config, dm)
        problem = family(2.0)
        factors = []

        def tracking_factorize(A):
            assert all(ref() is None for ref in factors), "an earlier LU factor is still alive"
            factor = factorize(A)
            factors.append(weakref.ref(factor))
            return factor

        monkeypatch.setattr(newton_module, "factorize", tracking_factorize)
        _, stats = newton_service.newton_solve(problem, NewtonConfig(), problem.initial_state())
        assert stats.iterations >= 2
        assert len(factors) == stats.iterations
        assert all(ref() is None for ref in factors)

    def test_verbose_iteration_lines(self, level1_mesh, patch_factory):
        problem, _, _ = patch_factory(level1_mesh)
        stream = io.StringIO()
        handler = configure_iteration_log(stream)
        try:
            _, stats = newton_service.newton_solve(problem, NewtonConfig(verbose=True), problem.initial_state(), step=3)
        finally:
            iteration_logger.removeHandler(handler)
            iteration_logger.propagate = True
        lines = stream.getvalue().splitlines()
        assert len(lines) == stats.iterations + 1
        assert re.fullmatch(r"3 2 0 \d\.\d{6}e[+-]\d{2} -", lines[0])
        assert re.fullmatch(r"3 2 1 \d\.\d{6}e[+-]\d{2} 1", lines[1])


class TestContinuation:
    def test_target_two_is_a_single_solve(self, level1_mesh):
        config = StudyConfig(p=2.0, element=ElementPair.BR1_P0, levels=1)
        dm = build_spaces(level1_mesh, config.element)
        family, _ = study_service.level_problem_family(config, dm)
        _, stats = newton_service.continuation_drive(family, 2.0, config.newton)
        assert [s.p for s in stats.steps] == [2.0]

    def test_path_to_shear_thinning_target(self, level1_mesh):
        config = StudyConfig(p=1.5, element=ElementPair.CCR_P1DG, levels=1)
        dm = build_spaces(level1_mesh, config.element)
        family, _ = study_service.level_problem_family(config, dm)
        state, stats = newton_service.continuation_drive(family, 1.5, config.newton)
        assert [s.p for s in stats.steps] == pytest.approx([2.0, 1.9, 1.8, 1.7, 1.6, 1.5])
        assert all(s.converged for s in stats.steps)
        residual = assemble_residual(family(1.5), state)
        assert np.linalg.norm(residual) <= config.newton.abs_tol

    @pytest.mark.slow
    def test_strongly_shear_thinning_level2(self):
        config = StudyConfig(p=1.1, element=ElementPair.CCR_P1DG, levels=2)
        dm = build_spaces(mesh_hierarchy(2)[-1], config.element)
        family, _ = study_service.level_problem_family(config, dm)
        _, stats = newton_service.continuation_drive(family, 1.1, config.newton)
        assert all(s.converged for s in stats.steps)

    def test_warm_start_from_coarse_level(self):
        config = StudyConfig(p=1.5, element=ElementPair.P2_P0, levels=2)
        coarse_mesh, fine_mesh = mesh_hierarchy(2)[1:]
        coarse_dm = build_spaces(coarse_mesh, config.element)
        coarse_family, _ = study_service.level_problem_family(config, coarse_dm)
        coarse_state, _ = newton_service.continuation_drive(coarse_family, 1.5, config.newton)

        fine_dm = build_spaces(fine_mesh, config.element)
        fine_family, _ = study_service.level_problem_family(config, fine_dm)
        hint = prolongate_state(coarse_state, fine_family(1.5))
        _, stats = newton_service.continuation_drive(fine_family, 1.5, config.newton, coarse_hint=hint)
        assert len(stats.steps) == 1
        assert stats.steps[0].converged


class TestProlongateState:
    def test_fortin_reconstruction_and_boundary(self, level1_mesh, level2_mesh, rng):
        config = StudyConfig(p=1.5, element=ElementPair.BR1_P0, levels=2)
        coarse = build_spaces(level1_mesh, config.element)
        fine = build_spaces(level2_mesh, config.element)
        family, _ = study_service.level_problem_family(config, fine)
        problem = family(1.5)
        coarse_state = SystemState(coarse, rng.normal(size=coarse.n_velocity), np.zeros(coarse.n_recon),
                                   rng.normal(size=coarse.n_pressure), 0.4)
        state = prolongate_state(coarse_state, problem)
        assert state.lam == 0.0
        np.testing.assert_array_equal(state.v[fine.dirichlet], problem.boundary[fine.dirichlet])
        np.testing.assert_allclose(recon_moment_matrix(fine) @ state.z, velocity_moment_matrix(fine) @ state.v, atol=1e-12)

    def test_linear_field_survives(self, level1_mesh, level2_mesh):
        coarse = build_spaces(level1_mesh, ElementPair.CCR_P1DG)
        fine = build_spaces(level2_mesh, ElementPair.CCR_P1DG)
        def field(pts):
            return np.stack([pts[:, 1], -pts[:, 0]], axis=1)

        coarse_state = SystemState(coarse, interpolate_velocity(coarse, field).coefficients,
                                   np.zeros(coarse.n_recon), np.zeros(coarse.n_pressure))
        boundary = interpolate_velocity(fine, field).coefficients
        problem = DiscreteProblem(fine, FlowLaw(p=1.5), ConvectiveMode.NONE,
                                  rhs=np.zeros(fine.n_velocity), boundary=boundary)
        state = prolongate_state(coarse_state, problem)
        np.testing.assert_allclose(state.v, boundary, atol=1e-13)
        assert not state.z.any()
