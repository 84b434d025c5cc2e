"""
Global finite element spaces on a mesh: DOF numbering, Dirichlet sets,
shape tables per cell chunk, canonical interpolation, Raviart-Thomas moments
and coarse-to-fine prolongation.

Global unknown layout: [velocity | reconstruction | pressure | multiplier].
Velocity DOFs are component-blocked over the scalar Lagrange nodes
(vertices, then edges for P2, then cells for the CCR bubble); BR1 edge-bubble
DOFs follow at 2 * n_scalar + e and carry the global edge normal.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from nsfem.core.config import settings
from nsfem.core.errors import DimensionMismatchError, DomainError
from nsfem.fem.elements import (
    CellGeometry,
    REFERENCE_EDGES,
    REFERENCE_VERTICES,
    cell_geometry,
    eval_rt_basis,
    eval_scalar_basis,
    piola_push,
    reference_basis,
    rt_local_signs,
)
from nsfem.fem.mesh import Mesh
from nsfem.fem.quadrature import edge_quadrature, triangle_quadrature
from nsfem.models.enums import BasisFamily, ElementPair

logger = logging.getLogger(__name__)

# sampler(points (C, N, 2), cells (C,)) -> values (C, N, 2)
Sampler = Callable[[np.ndarray, np.ndarray], np.ndarray]
VectorFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class DofMap:
    mesh: Mesh
    pair: ElementPair
    geometry: CellGeometry
    n_scalar: int
    n_velocity: int
    n_recon: int
    n_pressure: int
    cell_velocity: np.ndarray  # (T, nvl)
    cell_recon: np.ndarray     # (T, nzl)
    recon_signs: np.ndarray    # (T, nzl)
    cell_pressure: np.ndarray  # (T, nql)
    dirichlet: np.ndarray      # sorted velocity DOF indices

    @property
    def n_total(self) -> int:
        return self.n_velocity + self.n_recon + self.n_pressure + 1

    @property
    def v_slice(self) -> slice:
        return slice(0, self.n_velocity)

    @property
    def z_slice(self) -> slice:
        return slice(self.n_velocity, self.n_velocity + self.n_recon)

    @property
    def q_slice(self) -> slice:
        start = self.n_velocity + self.n_recon
        return slice(start, start + self.n_pressure)

    @property
    def lam_index(self) -> int:
        return self.n_total - 1

    @property
    def scalar_families(self) -> Tuple[BasisFamily, ...]:
        if self.pair is ElementPair.BR1_P0:
            return (BasisFamily.P1,)
        if self.pair is ElementPair.P2_P0:
            return (BasisFamily.P2,)
        return (BasisFamily.P2, BasisFamily.CELL_BUBBLE)

    @property
    def recon_family(self) -> BasisFamily:
        return BasisFamily.RT0 if self.pair.recon_degree == 0 else BasisFamily.RT1

    @property
    def pressure_family(self) -> BasisFamily:
        return BasisFamily.P0 if self.pair.pressure_degree == 0 else BasisFamily.P1DG

    @property
    def n_scalar_local(self) -> int:
        return sum(reference_basis(f).dof_count for f in self.scalar_families)

    @cached_property
    def dirichlet_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_velocity, dtype=bool)
        mask[self.dirichlet] = True
        return mask

    def counts(self) -> dict:
        return {
            "velocity": self.n_velocity,
            "recon": self.n_recon,
            "pressure": self.n_pressure,
            "total": self.n_total,
        }


def build_spaces(m: Mesh, pair: ElementPair) -> DofMap:
    """Deterministic DOF numbering and Dirichlet set for an element pair."""
    pair = ElementPair(pair)
    topo = m.topology
    n_v, n_e, n_t = m.n_vertices, topo.n_edges, m.n_cells
    cells = np.arange(n_t)

    scalar_cols = [m.triangles]
    if pair.velocity_degree == 2:
        scalar_cols.append(n_v + topo.cell_edges)
    if pair.has_cell_bubble:
        scalar_cols.append((n_v + n_e + cells)[:, None])
    cell_scalar = np.hstack(scalar_cols)
    n_scalar = n_v + (n_e if pair.velocity_degree == 2 else 0) + (n_t if pair.has_cell_bubble else 0)

    velocity_cols = [cell_scalar, n_scalar + cell_scalar]
    n_velocity = 2 * n_scalar
    if pair.has_edge_bubbles:
        velocity_cols.append(2 * n_scalar + topo.cell_edges)
        n_velocity += n_e
    cell_velocity = np.hstack(velocity_cols)

    if pair.recon_degree == 0:
        cell_recon = topo.cell_edges.copy()
        n_recon = n_e
        recon_signs = rt_local_signs(m, BasisFamily.RT0)
    else:
        cell_recon = np.empty((n_t, 8), dtype=np.int64)
        cell_recon[:, 0:6:2] = 2 * topo.cell_edges
        cell_recon[:, 1:6:2] = 2 * topo.cell_edges + 1
        cell_recon[:, 6] = 2 * n_e + 2 * cells
        cell_recon[:, 7] = 2 * n_e + 2 * cells + 1
        n_recon = 2 * n_e + 2 * n_t
        recon_signs = rt_local_signs(m, BasisFamily.RT1)

    if pair.pressure_degree == 0:
        cell_pressure = cells[:, None].copy()
        n_pressure = n_t
    else:
        cell_pressure = 3 * cells[:, None] + np.arange(3)[None, :]
        n_pressure = 3 * n_t

    bv = topo.boundary_vertices
    be = topo.boundary_edges
    dirichlet = [bv, n_scalar + bv]
    if pair.velocity_degree == 2:
        dirichlet += [n_v + be, n_scalar + n_v + be]
    if pair.has_edge_bubbles:
        dirichlet.append(2 * n_scalar + be)
    dirichlet = np.unique(np.concatenate(dirichlet))

    dofmap = DofMap(
        mesh=m,
        pair=pair,
        geometry=cell_geometry(m),
        n_scalar=n_scalar,
        n_velocity=n_velocity,
        n_recon=n_recon,
        n_pressure=n_pressure,
        cell_velocity=cell_velocity,
        cell_recon=cell_recon,
        recon_signs=recon_signs,
        cell_pressure=cell_pressure,
        dirichlet=dirichlet,
    )
    logger.debug("Spaces on level %d (%s): %s", m.level, pair.value, dofmap.counts())
    return dofmap


# ---- shape tables ----

def _per_cell(ref_points: np.ndarray, n_cells: int) -> Tuple[np.ndarray, bool]:
    ref = np.asarray(ref_points, dtype=float)
    if ref.ndim == 2:
        return ref, False
    if ref.shape[0] != n_cells:
        raise DimensionMismatchError("per-cell reference points", n_cells, ref.shape[0])
    return ref, True


def _scalar_table(family: BasisFamily, ref: np.ndarray, per_cell: bool, n_cells: int):
    """Values (C, N, nb) and reference gradients (C, N, nb, 2)."""
    basis = reference_basis(family)
    if per_cell:
        c, n = ref.shape[:2]
        vals, grads = eval_scalar_basis(basis, ref.reshape(-1, 2))
        return vals.reshape(c, n, -1), grads.reshape(c, n, -1, 2)
    vals, grads = eval_scalar_basis(basis, ref)
    return (
        np.broadcast_to(vals, (n_cells,) + vals.shape),
        np.broadcast_to(grads, (n_cells,) + grads.shape),
    )


def velocity_shapes(dofmap: DofMap, ref_points: np.ndarray, cells: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Physical velocity shapes of the given cells.

    Returns values (C, N, nvl, 2) and gradients (C, N, nvl, 2, 2) with
    grads[..., k, d] = d_d v_k. Reference points are shared (N, 2) or per cell
    (C, N, 2).
    """
    cells = np.asarray(cells, dtype=np.int64)
    n_cells = len(cells)
    ref, per_cell = _per_cell(ref_points, n_cells)
    tables = [_scalar_table(f, ref, per_cell, n_cells) for f in dofmap.scalar_families]
    s_vals = np.concatenate([t[0] for t in tables], axis=2)
    s_grads = dofmap.geometry.push_gradients(np.concatenate([t[1] for t in tables], axis=2), cells)
    n_q = s_vals.shape[1]
    ns = s_vals.shape[2]
    nvl = dofmap.cell_velocity.shape[1]

    vals = np.zeros((n_cells, n_q, nvl, 2))
    grads = np.zeros((n_cells, n_q, nvl, 2, 2))
    for comp in range(2):
        block = slice(comp * ns, (comp + 1) * ns)
        vals[:, :, block, comp] = s_vals
        grads[:, :, block, comp, :] = s_grads
    if dofmap.pair.has_edge_bubbles:
        b_vals, b_ref_grads = _scalar_table(BasisFamily.EDGE_BUBBLE_NORMAL, ref, per_cell, n_cells)
        b_grads = dofmap.geometry.push_gradients(b_ref_grads, cells)
        topo = dofmap.mesh.topology
        normals = topo.normals[topo.cell_edges[cells]]  # (C, 3, 2)
        vals[:, :, 2 * ns:, :] = b_vals[..., None] * normals[:, None, :, :]
        grads[:, :, 2 * ns:, :, :] = normals[:, None, :, :, None] * b_grads[:, :, :, None, :]
    return vals, grads


def recon_shapes(dofmap: DofMap, ref_points: np.ndarray, cells: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Pushed RT shapes of the given cells: values (C, N, nzl, 2), divergences (C, N, nzl)."""
    cells = np.asarray(cells, dtype=np.int64)
    ref, per_cell = _per_cell(ref_points, len(cells))
    basis = reference_basis(dofmap.recon_family)
    if per_cell:
        c, n = ref.shape[:2]
        vals, divs = eval_rt_basis(basis, ref.reshape(-1, 2))
        vals = vals.reshape(c, n, -1, 2)
        divs = divs.reshape(c, n, -1)
    else:
        vals, divs = eval_rt_basis(basis, ref)
    return piola_push(
        dofmap.mesh, cells, vals, divs, dofmap.recon_family,
        geometry=dofmap.geometry, signs=dofmap.recon_signs,
    )


def pressure_shapes(dofmap: DofMap, ref_points: np.ndarray) -> np.ndarray:
    """Pressure shape values at shared reference points, (N, nql) or (C, N, nql)."""
    ref = np.asarray(ref_points, dtype=float)
    flat = ref.reshape(-1, 2)
    vals, _ = eval_scalar_basis(reference_basis(dofmap.pressure_family), flat)
    return vals.reshape(ref.shape[:-1] + (vals.shape[-1],))


def pressure_gradients(dofmap: DofMap, cells: np.ndarray, n_points: int) -> np.ndarray:
    """Physical gradients (C, N, nql, 2) of the (piecewise affine) pressure shapes."""
    _, ref_grads = eval_scalar_basis(reference_basis(dofmap.pressure_family), np.zeros((1, 2)))
    ref_grads = np.broadcast_to(ref_grads, (len(cells), n_points) + ref_grads.shape[1:])
    return dofmap.geometry.push_gradients(ref_grads, cells)


# ---- fields ----

FIELD_KINDS = ("velocity", "recon", "pressure")


@dataclass
class FeField:
    dofmap: DofMap
    kind: str
    coefficients: np.ndarray

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise DomainError(f"unknown field kind {self.kind!r}; expected one of {FIELD_KINDS}")
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        expected = {
            "velocity": self.dofmap.n_velocity,
            "recon": self.dofmap.n_recon,
            "pressure": self.dofmap.n_pressure,
        }[self.kind]
        if self.coefficients.shape != (expected,):
            raise DimensionMismatchError(f"{self.kind} coefficients", expected, self.coefficients.size)

    @classmethod
    def zeros(cls, dofmap: DofMap, kind: str) -> "FeField":
        size = {"velocity": dofmap.n_velocity, "recon": dofmap.n_recon, "pressure": dofmap.n_pressure}[kind]
        return cls(dofmap, kind, np.zeros(size))


def eval_field(f: FeField, K, xhat) -> Tuple[np.ndarray, np.ndarray]:
    """Evaluate a field in cell(s) K at reference points.

    Velocity: (value, gradient); reconstruction: (value, divergence);
    pressure: (value, gradient). A scalar K drops the leading cell axis.
    """
    dm = f.dofmap
    cells = np.atleast_1d(np.asarray(K, dtype=np.int64))
    ref = np.asarray(xhat, dtype=float)
    single_point = ref.ndim == 1
    if single_point:
        ref = ref[None, :]
    if f.kind == "velocity":
        vals, grads = velocity_shapes(dm, ref, cells)
        coef = f.coefficients[dm.cell_velocity[cells]]
        value = np.einsum("cnlk,cl->cnk", vals, coef)
        deriv = np.einsum("cnlkd,cl->cnkd", grads, coef)
    elif f.kind == "recon":
        vals, divs = recon_shapes(dm, ref, cells)
        coef = f.coefficients[dm.cell_recon[cells]]
        value = np.einsum("cnlk,cl->cnk", vals, coef)
        deriv = np.einsum("cnl,cl->cn", divs, coef)
    else:
        coef = f.coefficients[dm.cell_pressure[cells]]
        vals = pressure_shapes(dm, ref)
        spec = "nl,cl->cn" if vals.ndim == 2 else "cnl,cl->cn"
        value = np.einsum(spec, vals, coef)
        grads = pressure_gradients(dm, cells, ref.shape[-2])
        deriv = np.einsum("cnld,cl->cnd", grads, coef)
    if single_point:
        value, deriv = value[:, 0], deriv[:, 0]
    if np.ndim(K) == 0:
        return value[0], deriv[0]
    return value, deriv


# ---- canonical interpolation ----

def _analytic_sampler(g: VectorFunction) -> Sampler:
    def sample(points: np.ndarray, cells: np.ndarray) -> np.ndarray:
        flat = points.reshape(-1, 2)
        return np.asarray(g(flat), dtype=float).reshape(points.shape)
    return sample


def _interpolate(dofmap: DofMap, sample: Sampler, boundary_only: bool) -> np.ndarray:
    m = dofmap.mesh
    topo = m.topology
    pair = dofmap.pair
    ns = dofmap.n_scalar
    n_v, n_e, n_t = m.n_vertices, topo.n_edges, m.n_cells
    cells = np.arange(n_t)
    coeffs = np.zeros(dofmap.n_velocity)

    corners = m.vertices[m.triangles]  # (T, 3, 2)
    corner_vals = sample(corners, cells)
    vmask = np.isin(m.triangles, topo.boundary_vertices) if boundary_only else np.ones((n_t, 3), dtype=bool)
    vidx = m.triangles[vmask]
    coeffs[vidx] = corner_vals[..., 0][vmask]
    coeffs[ns + vidx] = corner_vals[..., 1][vmask]

    start = corners[:, REFERENCE_EDGES[:, 0]]
    end = corners[:, REFERENCE_EDGES[:, 1]]
    emask = topo.boundary[topo.cell_edges] if boundary_only else np.ones((n_t, 3), dtype=bool)
    eidx = topo.cell_edges[emask]

    mid_vals = None
    if pair.velocity_degree == 2:
        mid_vals = sample(0.5 * (start + end), cells)
        coeffs[n_v + eidx] = mid_vals[..., 0][emask]
        coeffs[ns + n_v + eidx] = mid_vals[..., 1][emask]

    if pair.has_edge_bubbles:
        eq = edge_quadrature(settings.EDGE_QUAD_DEGREE)
        pts = start[:, :, None, :] + eq.points[None, None, :, None] * (end - start)[:, :, None, :]
        g_vals = sample(pts.reshape(n_t, -1, 2), cells).reshape(pts.shape)
        normals = topo.normals[topo.cell_edges]
        length = np.linalg.norm(end - start, axis=2)
        flux = length * np.einsum("q,tiqk,tik->ti", eq.weights, g_vals, normals)
        g_start = corner_vals[:, REFERENCE_EDGES[:, 0]]
        g_end = corner_vals[:, REFERENCE_EDGES[:, 1]]
        linear = 0.5 * length * np.einsum("tik,tik->ti", g_start + g_end, normals)
        # int_F lambda_a lambda_b ds = |F| / 6
        beta = (flux - linear) / (length / 6.0)
        coeffs[2 * ns + eidx] = beta[emask]

    if pair.has_cell_bubble and not boundary_only:
        centroid = corners.mean(axis=1, keepdims=True)
        c_vals = sample(centroid, cells)[:, 0]
        p2_at_centroid = -corner_vals.sum(axis=1) / 9.0 + 4.0 * mid_vals.sum(axis=1) / 9.0
        bubble = c_vals - p2_at_centroid
        bidx = n_v + n_e + cells
        coeffs[bidx] = bubble[:, 0]
        coeffs[ns + bidx] = bubble[:, 1]
    return coeffs


def interpolate_boundary(m: Mesh, pair: ElementPair, g: VectorFunction, dofmap: Optional[DofMap] = None) -> FeField:
    """Canonical interpolant of g restricted to the boundary DOFs; interior DOFs are zero."""
    dofmap = dofmap or build_spaces(m, pair)
    return FeField(dofmap, "velocity", _interpolate(dofmap, _analytic_sampler(g), boundary_only=True))


def interpolate_velocity(dofmap: DofMap, g: VectorFunction) -> FeField:
    """Canonical interpolant of g on all velocity DOFs."""
    return FeField(dofmap, "velocity", _interpolate(dofmap, _analytic_sampler(g), boundary_only=False))


def compatible_divergence_datum(m: Mesh, pair: ElementPair, g_b_h: FeField) -> float:
    """g1_h = (1/|Omega|) int_Omega div g_b_h dx by quadrature."""
    dm = g_b_h.dofmap
    if dm.mesh is not m or dm.pair is not ElementPair(pair):
        raise DomainError("field does not live on the given mesh and element pair")
    rule = triangle_quadrature(settings.QUAD_DEGREE_LINEAR)
    total = 0.0
    for chunk in cell_chunks(m.n_cells):
        _, grads = velocity_shapes(dm, rule.points, chunk)
        coef = g_b_h.coefficients[dm.cell_velocity[chunk]]
        div = np.einsum("cnlkk,cl->cn", grads, coef)
        total += float(np.einsum("cn,n,c->", div, rule.weights, dm.geometry.det[chunk]))
    area = float(m.areas.sum())
    return total / area


def cell_chunks(n_cells: int, size: Optional[int] = None) -> List[np.ndarray]:
    size = size or settings.ASSEMBLY_CHUNK_CELLS
    return [np.arange(start, min(start + size, n_cells)) for start in range(0, n_cells, size)]


# ---- Raviart-Thomas moments ----

def _edge_owners(m: Mesh) -> List[Tuple[int, np.ndarray, np.ndarray]]:
    """Per local edge index i: (i, owning cells, global edges)."""
    topo = m.topology
    owners = []
    for i in range(3):
        cells = np.flatnonzero(topo.cell_edge_sign[:, i] == 1)
        owners.append((i, cells, topo.cell_edges[cells, i]))
    return owners


MomentEvaluator = Callable[[np.ndarray, np.ndarray], np.ndarray]


def moment_blocks(dofmap: DofMap, evaluate: MomentEvaluator) -> List[Tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """RT moment functionals applied to a family of local vector shapes.

    `evaluate(ref_points, cells)` returns values (C, N, nl, 2). The result is a
    list of (rows (C,), cells (C,), data (C, nl)): for every edge e the
    moments int_F u.n_e phi ds with phi in {1, 2s-1} along the global
    direction (rows e, or 2e and 2e+1 for RT1), and for RT1 the cell moments
    int_K u.e_d dx (rows 2E + 2k + d).
    """
    m = dofmap.mesh
    topo = m.topology
    degree = dofmap.pair.recon_degree
    eq = edge_quadrature(settings.EDGE_QUAD_DEGREE)
    blocks = []
    for i, cells, edges in _edge_owners(m):
        if cells.size == 0:
            continue
        a, b = REFERENCE_EDGES[i]
        ref = REFERENCE_VERTICES[a] + eq.points[:, None] * (REFERENCE_VERTICES[b] - REFERENCE_VERTICES[a])
        vals = evaluate(ref, cells)  # (C, Q, nl, 2)
        flux = np.einsum("cqlk,ck->cql", vals, topo.normals[edges])
        length = topo.edge_lengths(m.vertices)[edges]
        blocks.append((edges * (degree + 1), cells, length[:, None] * np.einsum("q,cql->cl", eq.weights, flux)))
        if degree >= 1:
            direction = topo.cell_edge_dir[cells, i].astype(float)
            test = direction[:, None] * (2.0 * eq.points[None, :] - 1.0)  # (C, Q)
            data = length[:, None] * np.einsum("q,cq,cql->cl", eq.weights, test, flux)
            blocks.append((2 * edges + 1, cells, data))
    if degree >= 1:
        rule = triangle_quadrature(settings.QUAD_DEGREE_LINEAR)
        n_e = topo.n_edges
        for chunk in cell_chunks(m.n_cells):
            vals = evaluate(rule.points, chunk)
            det = dofmap.geometry.det[chunk]
            for d in range(2):
                data = det[:, None] * np.einsum("n,cnl->cl", rule.weights, vals[..., d])
                blocks.append((2 * n_e + 2 * chunk + d, chunk, data))
    return blocks


def _blocks_to_matrix(blocks, cell_dofs: np.ndarray, shape: Tuple[int, int]) -> sp.csr_matrix:
    rows, cols, data = [], [], []
    for r, cells, vals in blocks:
        nl = vals.shape[1]
        rows.append(np.repeat(r, nl))
        cols.append(cell_dofs[cells].ravel())
        data.append(vals.ravel())
    return sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=shape
    ).tocsr()


def recon_moment_matrix(dofmap: DofMap) -> sp.csr_matrix:
    """Moments of the RT shapes, (n_recon x n_recon)."""
    blocks = moment_blocks(dofmap, lambda ref, cells: recon_shapes(dofmap, ref, cells)[0])
    return _blocks_to_matrix(blocks, dofmap.cell_recon, (dofmap.n_recon, dofmap.n_recon))


def velocity_moment_matrix(dofmap: DofMap) -> sp.csr_matrix:
    """Moments of the velocity shapes, (n_recon x n_velocity)."""
    blocks = moment_blocks(dofmap, lambda ref, cells: velocity_shapes(dofmap, ref, cells)[0])
    return _blocks_to_matrix(blocks, dofmap.cell_velocity, (dofmap.n_recon, dofmap.n_velocity))


def function_moments(dofmap: DofMap, g: VectorFunction) -> np.ndarray:
    """RT moment vector of an analytic vector field."""

    def evaluate(ref: np.ndarray, cells: np.ndarray) -> np.ndarray:
        pts = dofmap.geometry.map_points(ref, cells)
        return np.asarray(g(pts.reshape(-1, 2)), dtype=float).reshape(pts.shape)[:, :, None, :]

    out = np.zeros(dofmap.n_recon)
    for rows, _, data in moment_blocks(dofmap, evaluate):
        np.add.at(out, rows, data[:, 0])
    return out


def fortin_interpolate(dofmap: DofMap, g: VectorFunction) -> FeField:
    """RT field with the same edge (and cell) moments as g."""
    moments = function_moments(dofmap, g)
    coeffs = splu(recon_moment_matrix(dofmap).tocsc()).solve(moments)
    return FeField(dofmap, "recon", coeffs)


def fortin_of_velocity(dofmap: DofMap, v: np.ndarray) -> np.ndarray:
    """RT coefficients z with the moments of the discrete velocity v."""
    rhs = velocity_moment_matrix(dofmap) @ v
    return splu(recon_moment_matrix(dofmap).tocsc()).solve(rhs)


# ---- prolongation ----

def prolongate_velocity(coarse: DofMap, fine: DofMap, v: np.ndarray) -> np.ndarray:
    """Canonical interpolant on the fine mesh of a coarse velocity field."""
    parent = fine.mesh.parent
    if parent is None or fine.mesh.level != coarse.mesh.level + 1:
        raise DomainError("fine mesh is not a red refinement of the coarse mesh")
    field = FeField(coarse, "velocity", v)

    def sample(points: np.ndarray, cells: np.ndarray) -> np.ndarray:
        host = parent[cells]
        ref = coarse.geometry.pull_back(points, host)
        value, _ = eval_field(field, host, ref)
        return value

    return _interpolate(fine, sample, boundary_only=False)


def prolongate_pressure(coarse: DofMap, fine: DofMap, q: np.ndarray) -> np.ndarray:
    parent = fine.mesh.parent
    if coarse.pressure_family is BasisFamily.P0:
        return np.asarray(q, dtype=float)[parent]
    # P1dg nodal values at the fine vertices, evaluated in the parent cell
    corners = fine.mesh.vertices[fine.mesh.triangles]
    ref = coarse.geometry.pull_back(corners, parent)
    value, _ = eval_field(FeField(coarse, "pressure", q), parent, ref)
    return value.ravel()
