"""
Residual and analytic Jacobian of the augmented discrete problem.

Blocks, in row order of the global vector [v | z | q | lambda]:
  R1  momentum rows  (S(Dv), Dw) + b(v, v, w) - (q, div w) - L(w),
      Dirichlet rows replaced by v - g_b
  R2  reconstruction rows  moments of (z - v)   (z pinned to 0 without reconstruction)
  R3  divergence rows  (div v, y) - g1 (1, y) + lambda (1, y)
  R4  pressure mean  (q, 1)
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Dict, List, Optional, Protocol, TextIO, Tuple, Union

import numpy as np
import scipy.sparse as sp

from nsfem.core.config import settings
from nsfem.core.errors import DimensionMismatchError
from nsfem.fem.nfunctions import stress_coefficients, stress_S, sym
from nsfem.fem.quadrature import triangle_quadrature
from nsfem.fem.spaces import (
    DofMap,
    FeField,
    cell_chunks,
    pressure_shapes,
    recon_moment_matrix,
    recon_shapes,
    velocity_moment_matrix,
    velocity_shapes,
)
from nsfem.models.enums import ConvectiveMode
from nsfem.models.models import FlowLaw

logger = logging.getLogger(__name__)


class ExactSolution(Protocol):
    """Pointwise exact velocity, velocity gradient and pressure."""

    def evaluate(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        ...


@dataclass
class SystemState:
    dofmap: DofMap
    v: np.ndarray
    z: np.ndarray
    q: np.ndarray
    lam: float = 0.0

    def __post_init__(self):
        for name, size in (("v", self.dofmap.n_velocity), ("z", self.dofmap.n_recon), ("q", self.dofmap.n_pressure)):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (size,):
                raise DimensionMismatchError(f"state component {name}", size, arr.size)
            setattr(self, name, arr)
        self.lam = float(self.lam)

    @classmethod
    def zeros(cls, dofmap: DofMap) -> "SystemState":
        return cls(dofmap, np.zeros(dofmap.n_velocity), np.zeros(dofmap.n_recon), np.zeros(dofmap.n_pressure))

    @classmethod
    def from_vector(cls, dofmap: DofMap, x: np.ndarray) -> "SystemState":
        x = np.asarray(x, dtype=float)
        if x.shape != (dofmap.n_total,):
            raise DimensionMismatchError("state vector", dofmap.n_total, x.size)
        return cls(dofmap, x[dofmap.v_slice].copy(), x[dofmap.z_slice].copy(), x[dofmap.q_slice].copy(), x[-1])

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.v, self.z, self.q, [self.lam]])

    @property
    def velocity(self) -> FeField:
        return FeField(self.dofmap, "velocity", self.v)

    @property
    def recon(self) -> FeField:
        return FeField(self.dofmap, "recon", self.z)

    @property
    def pressure(self) -> FeField:
        return FeField(self.dofmap, "pressure", self.q)


@dataclass(frozen=True, eq=False)
class DiscreteProblem:
    """Everything the residual needs besides the state."""
    dofmap: DofMap
    law: FlowLaw
    mode: ConvectiveMode
    rhs: np.ndarray       # L(w) on all velocity rows
    boundary: np.ndarray  # velocity coefficients; only Dirichlet entries are used
    g1: float = 0.0
    degree: int = field(default_factory=lambda: settings.QUAD_DEGREE_NONLINEAR)

    def __post_init__(self):
        n_v = self.dofmap.n_velocity
        for name in ("rhs", "boundary"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n_v,):
                raise DimensionMismatchError(f"problem {name}", n_v, arr.size)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "mode", ConvectiveMode(self.mode))

    @cached_property
    def fortin(self) -> Tuple[sp.csr_matrix, sp.csr_matrix]:
        return fortin_matrices(self.dofmap)

    def with_law(self, law: FlowLaw, rhs: np.ndarray) -> "DiscreteProblem":
        other = replace(self, law=law, rhs=rhs)
        if "fortin" in self.__dict__:
            other.__dict__["fortin"] = self.fortin
        return other

    def initial_state(self) -> SystemState:
        state = SystemState.zeros(self.dofmap)
        apply_boundary(self, state)
        return state


def apply_boundary(problem: DiscreteProblem, state: SystemState) -> SystemState:
    dirichlet = problem.dofmap.dirichlet
    state.v[dirichlet] = problem.boundary[dirichlet]
    return state


def fortin_matrices(dofmap: DofMap) -> Tuple[sp.csr_matrix, sp.csr_matrix]:
    """(Bz, Bv): RT moments of reconstruction and velocity shapes, so R2 = Bz z - Bv v."""
    return recon_moment_matrix(dofmap), velocity_moment_matrix(dofmap)


# ---- cell kernels ----

def _chunk_terms(problem: DiscreteProblem, state: SystemState, chunk: np.ndarray, with_jacobian: bool) -> Dict[str, np.ndarray]:
    dm = problem.dofmap
    law = problem.law
    mode = problem.mode
    rule = triangle_quadrature(problem.degree)
    vals, grads = velocity_shapes(dm, rule.points, chunk)  # (C,N,L,2), (C,N,L,2,2)
    qvals = pressure_shapes(dm, rule.points)                # (N,M)
    wd = dm.geometry.det[chunk][:, None] * rule.weights[None, :]

    v_loc = state.v[dm.cell_velocity[chunk]]
    v_qp = np.einsum("cnlk,cl->cnk", vals, v_loc)
    gv_qp = np.einsum("cnlkd,cl->cnkd", grads, v_loc)
    q_qp = np.einsum("nm,cm->cn", qvals, state.q[dm.cell_pressure[chunk]])
    divw = np.einsum("cnlkk->cnl", grads)
    divv = np.einsum("cnkk->cn", gv_qp)
    Dv = sym(gv_qp)

    out: Dict[str, np.ndarray] = {}
    r = np.einsum("cn,cnkd,cnlkd->cl", wd, stress_S(law, Dv), grads, optimize=True)
    r -= np.einsum("cn,cnl->cl", wd * q_qp, divw)
    out["div"] = np.einsum("cn,nm->cm", wd * divv, qvals)
    out["mass"] = np.einsum("cn,nm->cm", wd, qvals)

    if with_jacobian:
        Dw = 0.5 * (grads + np.swapaxes(grads, -1, -2))
        a, b = stress_coefficients(law, Dv)
        DvDw = np.einsum("cnkd,cnikd->cni", Dv, Dw)
        kvv = np.einsum("cn,cnikd,cnjkd->cij", wd * a, Dw, Dw, optimize=True)
        kvv += np.einsum("cn,cni,cnj->cij", wd * b, DvDw, DvDw, optimize=True)
        out["kvq"] = -np.einsum("cn,cni,nm->cim", wd, divw, qvals)
        out["kqv"] = np.einsum("cn,nm,cnj->cmj", wd, qvals, divw)

    if mode is ConvectiveMode.RECONSTRUCTION:
        zvals, _ = recon_shapes(dm, rule.points, chunk)
        z_qp = np.einsum("cnlk,cl->cnk", zvals, state.z[dm.cell_recon[chunk]])
        r -= np.einsum("cn,cnk,cnd,cnlkd->cl", wd, v_qp, z_qp, grads, optimize=True)
        if with_jacobian:
            kvv -= np.einsum("cn,cnjk,cnd,cnikd->cij", wd, vals, z_qp, grads, optimize=True)
            out["kvz"] = -np.einsum("cn,cnk,cnmd,cnikd->cim", wd, v_qp, zvals, grads, optimize=True)
    elif mode is ConvectiveMode.TEMAM:
        g1 = problem.g1
        conv = np.einsum("cnkd,cnd->cnk", gv_qp, v_qp)  # (grad v) v
        r += 0.5 * np.einsum("cn,cnlk,cnk->cl", wd, vals, conv + g1 * v_qp)
        r -= 0.5 * np.einsum("cn,cnk,cnd,cnlkd->cl", wd, v_qp, v_qp, grads, optimize=True)
        if with_jacobian:
            kvv += 0.5 * np.einsum("cn,cnik,cnjkd,cnd->cij", wd, vals, grads, v_qp, optimize=True)
            kvv += 0.5 * np.einsum("cn,cnik,cnkd,cnjd->cij", wd, vals, gv_qp, vals, optimize=True)
            kvv -= 0.5 * np.einsum("cn,cnjk,cnd,cnikd->cij", wd, vals, v_qp, grads, optimize=True)
            kvv -= 0.5 * np.einsum("cn,cnk,cnjd,cnikd->cij", wd, v_qp, vals, grads, optimize=True)
            kvv += 0.5 * g1 * np.einsum("cn,cnik,cnjk->cij", wd, vals, vals, optimize=True)

    out["r"] = r
    if with_jacobian:
        out["kvv"] = kvv
    return out


def _run_chunks(problem: DiscreteProblem, state: SystemState, with_jacobian: bool) -> List[Tuple[np.ndarray, Dict[str, np.ndarray]]]:
    chunks = cell_chunks(problem.dofmap.mesh.n_cells)

    def work(chunk):
        return chunk, _chunk_terms(problem, state, chunk, with_jacobian)

    if settings.THREADS > 1 and len(chunks) > 1:
        # pool.map keeps chunk order, so the reduction below is deterministic
        with ThreadPoolExecutor(max_workers=settings.THREADS) as pool:
            return list(pool.map(work, chunks))
    return [work(c) for c in chunks]


def _scatter(cell_dofs: np.ndarray, results, key: str, size: int) -> np.ndarray:
    idx = np.concatenate([cell_dofs[chunk].ravel() for chunk, _ in results])
    data = np.concatenate([terms[key].ravel() for _, terms in results])
    return np.bincount(idx, weights=data, minlength=size)


def _check_state(problem: DiscreteProblem, state: SystemState) -> None:
    if state.dofmap is not problem.dofmap:
        dm, other = problem.dofmap, state.dofmap
        if (dm.n_velocity, dm.n_recon, dm.n_pressure) != (other.n_velocity, other.n_recon, other.n_pressure):
            raise DimensionMismatchError("state size", dm.n_total, other.n_total)


def assemble_residual(problem: DiscreteProblem, state: SystemState) -> np.ndarray:
    _check_state(problem, state)
    dm = problem.dofmap
    results = _run_chunks(problem, state, with_jacobian=False)

    r1 = _scatter(dm.cell_velocity, results, "r", dm.n_velocity) - problem.rhs
    r1[dm.dirichlet] = state.v[dm.dirichlet] - problem.boundary[dm.dirichlet]

    if problem.mode is ConvectiveMode.RECONSTRUCTION:
        bz, bv = problem.fortin
        r2 = bz @ state.z - bv @ state.v
    else:
        r2 = state.z.copy()

    mass = _scatter(dm.cell_pressure, results, "mass", dm.n_pressure)
    r3 = _scatter(dm.cell_pressure, results, "div", dm.n_pressure) + (state.lam - problem.g1) * mass
    r4 = float(mass @ state.q)
    return np.concatenate([r1, r2, r3, [r4]])


def _coo_block(results, key: str, row_dofs: np.ndarray, col_dofs: np.ndarray, row_off: int, col_off: int):
    rows, cols, data = [], [], []
    for chunk, terms in results:
        block = terms[key]
        r = row_dofs[chunk][:, :, None] + row_off
        c = col_dofs[chunk][:, None, :] + col_off
        rows.append(np.broadcast_to(r, block.shape).ravel())
        cols.append(np.broadcast_to(c, block.shape).ravel())
        data.append(block.ravel())
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(data)


def assemble_jacobian(problem: DiscreteProblem, state: SystemState) -> sp.csr_matrix:
    """Exact derivative of assemble_residual at state, in CSR format."""
    _check_state(problem, state)
    dm = problem.dofmap
    n = dm.n_total
    z_off = dm.z_slice.start
    q_off = dm.q_slice.start
    lam = dm.lam_index
    results = _run_chunks(problem, state, with_jacobian=True)

    parts = [
        _coo_block(results, "kvv", dm.cell_velocity, dm.cell_velocity, 0, 0),
        _coo_block(results, "kvq", dm.cell_velocity, dm.cell_pressure, 0, q_off),
        _coo_block(results, "kqv", dm.cell_pressure, dm.cell_velocity, q_off, 0),
    ]
    if problem.mode is ConvectiveMode.RECONSTRUCTION:
        parts.append(_coo_block(results, "kvz", dm.cell_velocity, dm.cell_recon, 0, z_off))
        bz, bv = problem.fortin
        bz = bz.tocoo()
        bv = bv.tocoo()
        parts.append((bz.row + z_off, bz.col + z_off, bz.data))
        parts.append((bv.row + z_off, bv.col, -bv.data))
    else:
        idx = np.arange(dm.n_recon) + z_off
        parts.append((idx, idx, np.ones(dm.n_recon)))

    mass = _scatter(dm.cell_pressure, results, "mass", dm.n_pressure)
    q_idx = np.arange(dm.n_pressure) + q_off
    parts.append((q_idx, np.full(dm.n_pressure, lam), mass))
    parts.append((np.full(dm.n_pressure, lam), q_idx, mass))

    rows = np.concatenate([p[0] for p in parts])
    cols = np.concatenate([p[1] for p in parts])
    data = np.concatenate([p[2] for p in parts])
    # Dirichlet rows become identity rows; zeroed entries stay stored so the
    # sparsity pattern does not depend on the state
    fixed = np.zeros(n, dtype=bool)
    fixed[dm.dirichlet] = True
    data = np.where(fixed[rows], 0.0, data)
    rows = np.concatenate([rows, dm.dirichlet])
    cols = np.concatenate([cols, dm.dirichlet])
    data = np.concatenate([data, np.ones(dm.dirichlet.size)])
    return sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()


# ---- forcing ----

def manufactured_rhs(
    dofmap: DofMap,
    exact: ExactSolution,
    law: FlowLaw,
    include_convection: bool = True,
    degree: Optional[int] = None,
) -> np.ndarray:
    """L(w) = (S(Dv), Dw) - (v x v, grad w) - (q, div w) with the exact fields."""
    rule = triangle_quadrature(degree or settings.QUAD_DEGREE_NONLINEAR)
    chunk_rows, chunk_data = [], []
    for chunk in cell_chunks(dofmap.mesh.n_cells):
        _, grads = velocity_shapes(dofmap, rule.points, chunk)
        pts = dofmap.geometry.map_points(rule.points, chunk)
        v, gv, q = exact.evaluate(pts.reshape(-1, 2))
        v = np.asarray(v).reshape(pts.shape)
        gv = np.asarray(gv).reshape(pts.shape[:2] + (2, 2))
        q = np.asarray(q).reshape(pts.shape[:2])
        wd = dofmap.geometry.det[chunk][:, None] * rule.weights[None, :]
        local = np.einsum("cn,cnkd,cnlkd->cl", wd, stress_S(law, gv), grads, optimize=True)
        local -= np.einsum("cn,cnlkk->cl", wd * q, grads)
        if include_convection:
            local -= np.einsum("cn,cnk,cnd,cnlkd->cl", wd, v, v, grads, optimize=True)
        chunk_rows.append(dofmap.cell_velocity[chunk].ravel())
        chunk_data.append(local.ravel())
    return np.bincount(np.concatenate(chunk_rows), weights=np.concatenate(chunk_data), minlength=dofmap.n_velocity)


# ---- scalar forms (diagnostics and tests) ----

def _velocity_tables(dofmap: DofMap, chunk: np.ndarray, degree: int):
    rule = triangle_quadrature(degree)
    vals, grads = velocity_shapes(dofmap, rule.points, chunk)
    wd = dofmap.geometry.det[chunk][:, None] * rule.weights[None, :]
    return rule, vals, grads, wd


def _at_points(vals, grads, cell_dofs, coef):
    local = coef[cell_dofs]
    return np.einsum("cnlk,cl->cnk", vals, local), np.einsum("cnlkd,cl->cnkd", grads, local)


def temam_form(dofmap: DofMap, u: np.ndarray, v: np.ndarray, w: np.ndarray, g1: float, degree: Optional[int] = None) -> float:
    """b(u, v, w) = 1/2 (w x u, grad v) - 1/2 (v x u, grad w) + 1/2 (g1 u, w)."""
    degree = degree or settings.QUAD_DEGREE_NONLINEAR
    total = 0.0
    for chunk in cell_chunks(dofmap.mesh.n_cells):
        _, vals, grads, wd = _velocity_tables(dofmap, chunk, degree)
        cd = dofmap.cell_velocity[chunk]
        u_qp, _ = _at_points(vals, grads, cd, u)
        v_qp, gv = _at_points(vals, grads, cd, v)
        w_qp, gw = _at_points(vals, grads, cd, w)
        integrand = 0.5 * np.einsum("cnk,cnd,cnkd->cn", w_qp, u_qp, gv)
        integrand -= 0.5 * np.einsum("cnk,cnd,cnkd->cn", v_qp, u_qp, gw)
        integrand += 0.5 * g1 * np.einsum("cnk,cnk->cn", u_qp, w_qp)
        total += float((wd * integrand).sum())
    return total


def convective_form(dofmap: DofMap, u: np.ndarray, z: np.ndarray, w: np.ndarray, degree: Optional[int] = None) -> float:
    """-(u x z, grad w) with z a reconstruction field."""
    degree = degree or settings.QUAD_DEGREE_NONLINEAR
    total = 0.0
    for chunk in cell_chunks(dofmap.mesh.n_cells):
        rule, vals, grads, wd = _velocity_tables(dofmap, chunk, degree)
        cd = dofmap.cell_velocity[chunk]
        u_qp, _ = _at_points(vals, grads, cd, u)
        _, gw = _at_points(vals, grads, cd, w)
        zvals, _ = recon_shapes(dofmap, rule.points, chunk)
        z_qp = np.einsum("cnlk,cl->cnk", zvals, z[dofmap.cell_recon[chunk]])
        total -= float(np.einsum("cn,cnk,cnd,cnkd->", wd, u_qp, z_qp, gw, optimize=True))
    return total


def divergence_energy(dofmap: DofMap, z: np.ndarray, w: np.ndarray, degree: Optional[int] = None) -> float:
    """1/2 (div z, |w|^2)."""
    degree = degree or settings.QUAD_DEGREE_NONLINEAR
    total = 0.0
    for chunk in cell_chunks(dofmap.mesh.n_cells):
        rule, vals, grads, wd = _velocity_tables(dofmap, chunk, degree)
        w_qp, _ = _at_points(vals, grads, dofmap.cell_velocity[chunk], w)
        _, zdiv = recon_shapes(dofmap, rule.points, chunk)
        divz = np.einsum("cnl,cl->cn", zdiv, z[dofmap.cell_recon[chunk]])
        total += 0.5 * float(np.einsum("cn,cn,cnk,cnk->", wd, divz, w_qp, w_qp, optimize=True))
    return total


def divergence_matrix(dofmap: DofMap) -> sp.csr_matrix:
    """B[m, j] = (div phi_j, y_m), shape (n_pressure, n_velocity)."""
    rule = triangle_quadrature(settings.QUAD_DEGREE_LINEAR)
    qvals = pressure_shapes(dofmap, rule.points)
    rows, cols, data = [], [], []
    for chunk in cell_chunks(dofmap.mesh.n_cells):
        _, grads = velocity_shapes(dofmap, rule.points, chunk)
        wd = dofmap.geometry.det[chunk][:, None] * rule.weights[None, :]
        block = np.einsum("cn,nm,cnjkk->cmj", wd, qvals, grads)
        rows.append(np.broadcast_to(dofmap.cell_pressure[chunk][:, :, None], block.shape).ravel())
        cols.append(np.broadcast_to(dofmap.cell_velocity[chunk][:, None, :], block.shape).ravel())
        data.append(block.ravel())
    shape = (dofmap.n_pressure, dofmap.n_velocity)
    return sp.coo_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=shape).tocsr()


def dump_matrix(A: sp.spmatrix, out: Union[str, TextIO]) -> None:
    """Coordinate text dump, one `row col value` line per stored entry."""
    coo = sp.coo_matrix(A)
    lines = "".join(f"{r} {c} {v:.17g}\n" for r, c, v in zip(coo.row, coo.col, coo.data))
    if isinstance(out, str):
        with open(out, "w") as fh:
            fh.write(lines)
    else:
        out.write(lines)
