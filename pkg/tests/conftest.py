import numpy as np
import pytest

from nsfem.fem.assembly import DiscreteProblem, SystemState, manufactured_rhs
from nsfem.fem.mesh import mesh_hierarchy, refine_red, unit_square_initial
from nsfem.fem.spaces import build_spaces, compatible_divergence_datum, interpolate_boundary, interpolate_velocity
from nsfem.models.enums import ConvectiveMode, ElementPair
from nsfem.models.models import FlowLaw, LevelResult, RateTable, StudyConfig, StudyReport


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def initial_mesh():
    return unit_square_initial()


@pytest.fixture
def level1_mesh():
    return refine_red(unit_square_initial())


@pytest.fixture
def level2_mesh():
    return mesh_hierarchy(2)[-1]


@pytest.fixture
def shear_thinning_law():
    return FlowLaw(p=1.3, delta=1e-2, nu0=100.0)


@pytest.fixture
def stokes_law():
    return FlowLaw(p=2.0, delta=0.0, nu0=1.0)


class PatchSolution:
    """v = (x + y, x - y), q = x - 1/2: a linear Stokes solution."""

    def velocity(self, pts):
        x, y = pts[:, 0], pts[:, 1]
        return np.stack([x + y, x - y], axis=1)

    def evaluate(self, pts):
        grad = np.broadcast_to(np.array([[1.0, 1.0], [1.0, -1.0]]), (len(pts), 2, 2))
        return self.velocity(pts), grad, pts[:, 0] - 0.5


@pytest.fixture
def patch_factory():
    """Builds (problem, exact, expected state) of the Stokes patch test on a mesh."""

    def build(m, pair=ElementPair.CCR_P1DG):
        dm = build_spaces(m, pair)
        exact = PatchSolution()
        law = FlowLaw(p=2.0, delta=0.0, nu0=1.0)
        g_b = interpolate_boundary(m, pair, exact.velocity, dofmap=dm)
        g1 = compatible_divergence_datum(m, pair, g_b)
        rhs = manufactured_rhs(dm, exact, law, include_convection=False)
        problem = DiscreteProblem(dm, law, ConvectiveMode.NONE, rhs=rhs, boundary=g_b.coefficients, g1=g1)
        v = interpolate_velocity(dm, exact.velocity).coefficients
        q = np.zeros(dm.n_pressure)
        if pair is ElementPair.CCR_P1DG:
            q = (m.vertices[m.triangles][:, :, 0] - 0.5).ravel()
        expected = SystemState(dm, v, np.zeros(dm.n_recon), q, 0.0)
        return problem, exact, expected

    return build


@pytest.fixture
def sample_report():
    """A two-level report with made-up errors, no solve involved."""

    def build(**config_overrides):
        config = StudyConfig(p=1.5, levels=1, **config_overrides)
        report = StudyReport(config=config, rates=RateTable(p=config.p))
        for level, scale in ((0, 1.0), (1, 0.5)):
            report.levels.append(LevelResult(
                level=level, h=scale, diameter=scale * 2**0.5, chunkiness=4.828427, ndof=100 * (level + 1),
                newton_iters=7 - level, e_F=0.2 * scale, e_q_lp=0.4 * scale**0.5, e_q_l2=0.1 * scale,
                modular_F=0.01 * scale**2, mean_q=1e-12, final_residual=1e-10,
            ))
        report.eoc_F, report.eoc_lp, report.eoc_l2 = [1.0], [0.5], [1.0]
        return report

    return build
