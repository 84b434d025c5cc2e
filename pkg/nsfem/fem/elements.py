"""
Reference-element shape functions, affine cell geometry and the contravariant
Piola map.

Reference triangle: vertices (0,0), (1,0), (0,1) with barycentric coordinates
lambda0 = 1-x-y, lambda1 = x, lambda2 = y. Local edge i lies opposite vertex i
and runs from vertex (i+1)%3 to vertex (i+2)%3.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from nsfem.core.errors import DomainError
from nsfem.fem.mesh import Mesh
from nsfem.fem.quadrature import edge_quadrature, triangle_quadrature
from nsfem.models.enums import BasisFamily

REFERENCE_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
# start and end vertex of local edge i
REFERENCE_EDGES = np.array([[1, 2], [2, 0], [0, 1]])
REFERENCE_NORMALS = np.array([[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]) / np.array([[np.sqrt(2.0)], [1.0], [1.0]])
REFERENCE_EDGE_LENGTHS = np.array([np.sqrt(2.0), 1.0, 1.0])
LAMBDA_GRADS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])

_DOF_COUNTS = {
    BasisFamily.P1: 3,
    BasisFamily.P2: 6,
    BasisFamily.CELL_BUBBLE: 1,
    BasisFamily.EDGE_BUBBLE_NORMAL: 3,
    BasisFamily.P0: 1,
    BasisFamily.P1DG: 3,
    BasisFamily.RT0: 3,
    BasisFamily.RT1: 8,
}

# x^i y^j coefficient tables, one per vector component
Poly = Dict[Tuple[int, int], float]
_RT_MONOMIALS: Dict[BasisFamily, List[Tuple[Poly, Poly]]] = {
    BasisFamily.RT0: [
        ({(0, 0): 1.0}, {}),
        ({}, {(0, 0): 1.0}),
        ({(1, 0): 1.0}, {(0, 1): 1.0}),
    ],
    BasisFamily.RT1: [
        ({(0, 0): 1.0}, {}),
        ({}, {(0, 0): 1.0}),
        ({(1, 0): 1.0}, {}),
        ({}, {(1, 0): 1.0}),
        ({(0, 1): 1.0}, {}),
        ({}, {(0, 1): 1.0}),
        ({(2, 0): 1.0}, {(1, 1): 1.0}),
        ({(1, 1): 1.0}, {(0, 2): 1.0}),
    ],
}


def _as_points(xhat) -> Tuple[np.ndarray, bool]:
    pts = np.asarray(xhat, dtype=float)
    single = pts.ndim == 1
    return np.atleast_2d(pts), single


def _poly_eval(poly: Poly, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    for (i, j), c in poly.items():
        out += c * x**i * y**j
    return out


def _poly_dx(poly: Poly, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    for (i, j), c in poly.items():
        if i:
            out += c * i * x ** (i - 1) * y**j
    return out


def _poly_dy(poly: Poly, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    for (i, j), c in poly.items():
        if j:
            out += c * j * x**i * y ** (j - 1)
    return out


def _edge_test_functions(degree: int, s: np.ndarray) -> np.ndarray:
    """(k+1, N) Legendre-type test functions 1, 2s-1 on [0, 1]."""
    rows = [np.ones_like(s)]
    if degree >= 1:
        rows.append(2.0 * s - 1.0)
    return np.array(rows)


def rt_reference_dofs(degree: int, field: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Apply the RT_k functionals on the reference triangle to a vector field.

    Edge i contributes int v.n phi_j ds for phi_j in {1, 2s-1} (s along the
    local edge direction); RT1 adds int v.e_d dx for d = 0, 1.
    """
    eq = edge_quadrature(4)
    dofs = []
    for i, (a, b) in enumerate(REFERENCE_EDGES):
        pts = REFERENCE_VERTICES[a] + eq.points[:, None] * (REFERENCE_VERTICES[b] - REFERENCE_VERTICES[a])
        flux = field(pts) @ REFERENCE_NORMALS[i]
        tests = _edge_test_functions(degree, eq.points)
        dofs.extend(REFERENCE_EDGE_LENGTHS[i] * (tests * (eq.weights * flux)).sum(axis=1))
    if degree >= 1:
        tq = triangle_quadrature(4)
        dofs.extend(tq.weights @ field(tq.points))
    return np.asarray(dofs)


@dataclass(frozen=True)
class ReferenceBasis:
    family: BasisFamily
    dof_count: int
    # RT only: monomial coefficients, column l is shape function l
    coefficients: Optional[np.ndarray] = None

    @property
    def rt_degree(self) -> int:
        return 0 if self.family is BasisFamily.RT0 else 1


@lru_cache(maxsize=None)
def reference_basis(family: Union[BasisFamily, str]) -> ReferenceBasis:
    family = BasisFamily(family)
    if not family.is_vector:
        return ReferenceBasis(family=family, dof_count=_DOF_COUNTS[family])
    monomials = _RT_MONOMIALS[family]
    degree = 0 if family is BasisFamily.RT0 else 1

    def monomial_field(m):
        return lambda pts: np.stack(
            [_poly_eval(m[0], pts[:, 0], pts[:, 1]), _poly_eval(m[1], pts[:, 0], pts[:, 1])], axis=1
        )

    dof_matrix = np.column_stack([rt_reference_dofs(degree, monomial_field(m)) for m in monomials])
    coefficients = np.linalg.inv(dof_matrix)
    coefficients.setflags(write=False)
    return ReferenceBasis(family=family, dof_count=len(monomials), coefficients=coefficients)


def eval_scalar_basis(b: ReferenceBasis, xhat) -> Tuple[np.ndarray, np.ndarray]:
    """Values (N, nb) and reference gradients (N, nb, 2) at reference points."""
    if b.family.is_vector:
        raise DomainError(f"{b.family.value} is a vector family")
    pts, single = _as_points(xhat)
    n = len(pts)
    lam = np.stack([1.0 - pts[:, 0] - pts[:, 1], pts[:, 0], pts[:, 1]], axis=1)
    family = b.family

    if family in (BasisFamily.P1, BasisFamily.P1DG):
        values = lam
        grads = np.broadcast_to(LAMBDA_GRADS, (n, 3, 2)).copy()
    elif family is BasisFamily.P0:
        values = np.ones((n, 1))
        grads = np.zeros((n, 1, 2))
    elif family is BasisFamily.P2:
        values = np.empty((n, 6))
        grads = np.empty((n, 6, 2))
        for i in range(3):
            values[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
            grads[:, i] = (4.0 * lam[:, i] - 1.0)[:, None] * LAMBDA_GRADS[i]
            j, k = (i + 1) % 3, (i + 2) % 3
            values[:, 3 + i] = 4.0 * lam[:, j] * lam[:, k]
            grads[:, 3 + i] = 4.0 * (lam[:, k, None] * LAMBDA_GRADS[j] + lam[:, j, None] * LAMBDA_GRADS[k])
    elif family is BasisFamily.EDGE_BUBBLE_NORMAL:
        values = np.empty((n, 3))
        grads = np.empty((n, 3, 2))
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            values[:, i] = lam[:, j] * lam[:, k]
            grads[:, i] = lam[:, k, None] * LAMBDA_GRADS[j] + lam[:, j, None] * LAMBDA_GRADS[k]
    elif family is BasisFamily.CELL_BUBBLE:
        values = (27.0 * lam[:, 0] * lam[:, 1] * lam[:, 2])[:, None]
        grads = 27.0 * (
            (lam[:, 1] * lam[:, 2])[:, None] * LAMBDA_GRADS[0]
            + (lam[:, 0] * lam[:, 2])[:, None] * LAMBDA_GRADS[1]
            + (lam[:, 0] * lam[:, 1])[:, None] * LAMBDA_GRADS[2]
        )[:, None, :]
    else:
        raise DomainError(f"unknown scalar family {family}")

    if single:
        return values[0], grads[0]
    return values, grads


def eval_rt_basis(b: ReferenceBasis, xhat) -> Tuple[np.ndarray, np.ndarray]:
    """Reference values (N, nb, 2) and divergences (N, nb) of RT_k shapes."""
    if not b.family.is_vector:
        raise DomainError(f"{b.family.value} is not a Raviart-Thomas family")
    pts, single = _as_points(xhat)
    x, y = pts[:, 0], pts[:, 1]
    monomials = _RT_MONOMIALS[b.family]
    mono_vals = np.stack(
        [np.stack([_poly_eval(cx, x, y), _poly_eval(cy, x, y)], axis=1) for cx, cy in monomials], axis=1
    )  # (N, M, 2)
    mono_div = np.stack([_poly_dx(cx, x, y) + _poly_dy(cy, x, y) for cx, cy in monomials], axis=1)
    values = np.einsum("nmc,ml->nlc", mono_vals, b.coefficients)
    divs = mono_div @ b.coefficients
    if single:
        return values[0], divs[0]
    return values, divs


@dataclass(frozen=True)
class CellGeometry:
    """Affine maps x = origin + J xhat of all cells of a mesh."""
    origin: np.ndarray     # (T, 2)
    jac: np.ndarray        # (T, 2, 2)
    det: np.ndarray        # (T,)
    jac_inv_t: np.ndarray  # (T, 2, 2)

    def map_points(self, ref_points: np.ndarray, cells=slice(None)) -> np.ndarray:
        """(C, N, 2) physical images of reference points (N, 2) or (C, N, 2)."""
        ref = np.asarray(ref_points, dtype=float)
        spec = "cij,nj->cni" if ref.ndim == 2 else "cij,cnj->cni"
        return self.origin[cells][:, None, :] + np.einsum(spec, self.jac[cells], ref)

    def pull_back(self, points: np.ndarray, cells) -> np.ndarray:
        """(C, N, 2) reference coordinates of physical points (C, N, 2) in the given cells."""
        inv = np.swapaxes(self.jac_inv_t[cells], 1, 2)
        return np.einsum("cij,cnj->cni", inv, points - self.origin[cells][:, None, :])

    def push_gradients(self, ref_grads: np.ndarray, cells=slice(None)) -> np.ndarray:
        """(C, N, nb, 2) physical gradients from per-cell reference gradients (C, N, nb, 2)."""
        return np.einsum("cij,cnbj->cnbi", self.jac_inv_t[cells], ref_grads)


def cell_geometry(m: Mesh) -> CellGeometry:
    pts = m.vertices[m.triangles]
    origin = pts[:, 0]
    jac = np.stack([pts[:, 1] - origin, pts[:, 2] - origin], axis=2)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    inv = np.linalg.inv(jac)
    return CellGeometry(origin=origin, jac=jac, det=det, jac_inv_t=np.swapaxes(inv, 1, 2))


def rt_local_signs(m: Mesh, family: BasisFamily) -> np.ndarray:
    """(T, nb) factors turning local RT DOFs into global ones.

    Flux moments follow the global edge normal; the linear edge moment also
    follows the global edge direction (lower to higher vertex).
    """
    topo = m.topology
    sign = topo.cell_edge_sign.astype(float)
    if BasisFamily(family) is BasisFamily.RT0:
        return sign
    out = np.ones((m.n_cells, 8))
    out[:, 0:6:2] = sign
    out[:, 1:6:2] = sign * topo.cell_edge_dir
    return out


def piola_push(
    m: Mesh,
    K,
    ref_values: np.ndarray,
    ref_divergences: np.ndarray,
    family: BasisFamily,
    geometry: Optional[CellGeometry] = None,
    signs: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Contravariant Piola map v = J vhat / det J, div v = div vhat / det J.

    Shape l of cell K is multiplied by its global sign so that pushed shapes
    sharing a global DOF agree across the edge.
    """
    geometry = geometry or cell_geometry(m)
    cells = np.atleast_1d(np.asarray(K, dtype=np.int64))
    signs = (rt_local_signs(m, family) if signs is None else signs)[cells]  # (C, nb)
    det = geometry.det[cells]
    spec = "cij,nlj->cnli" if ref_values.ndim == 3 else "cij,cnlj->cnli"
    values = np.einsum(spec, geometry.jac[cells], ref_values) / det[:, None, None, None]
    values = values * signs[:, None, :, None]
    divs = ref_divergences / det[:, None, None] * signs[:, None, :]
    if np.ndim(K) == 0:
        return values[0], divs[0]
    return values, divs
