"""
Triangulations of the unit square: criss-cross initial mesh, red refinement,
edge topology with orientation signs, and shape diagnostics.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from nsfem.core.errors import MeshTopologyError

logger = logging.getLogger(__name__)

_BOUNDARY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Topology:
    """Edge tables of a conforming mesh.

    Local edge i of a triangle lies opposite local vertex i and runs from
    vertex (i+1)%3 to vertex (i+2)%3.
    """
    edges: np.ndarray            # (E, 2) vertex pairs, lower index first, lexicographic
    edge_cells: np.ndarray       # (E, 2) adjacent triangles ascending, -1 if absent
    boundary: np.ndarray         # (E,) bool
    normals: np.ndarray          # (E, 2) unit, outward of edge_cells[:, 0]
    cell_edges: np.ndarray       # (T, 3) global edge of each local edge
    cell_edge_sign: np.ndarray   # (T, 3) +1 where the global normal is outward of the cell
    cell_edge_dir: np.ndarray    # (T, 3) +1 where the local direction is lower -> higher vertex
    boundary_vertices: np.ndarray
    boundary_edges: np.ndarray

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def interior_edges(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary)

    def edge_lengths(self, vertices: np.ndarray) -> np.ndarray:
        return np.linalg.norm(vertices[self.edges[:, 1]] - vertices[self.edges[:, 0]], axis=1)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable triangulation; topology is built on first access."""
    vertices: np.ndarray   # (V, 2)
    triangles: np.ndarray  # (T, 3), counterclockwise
    level: int = 0
    parent: Optional[np.ndarray] = None  # parent triangle on the previous level

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.ascontiguousarray(self.vertices, dtype=float))
        object.__setattr__(self, "triangles", np.ascontiguousarray(self.triangles, dtype=np.int64))
        self.vertices.setflags(write=False)
        self.triangles.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return self.topology.n_edges

    @property
    def h(self) -> float:
        """Reporting mesh size h_i = 2^-i of the canonical hierarchy."""
        return 2.0 ** (-self.level)

    @cached_property
    def topology(self) -> Topology:
        return locate_and_adjacency(self)

    @cached_property
    def areas(self) -> np.ndarray:
        return signed_areas(self.vertices, self.triangles)

    @cached_property
    def diameters(self) -> np.ndarray:
        return _side_lengths(self.vertices, self.triangles).max(axis=1)

    @property
    def diameter(self) -> float:
        """True maximal element diameter."""
        return float(self.diameters.max())

    @property
    def edges(self) -> np.ndarray:
        return self.topology.edges


def signed_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    a, b, c = (vertices[triangles[:, i]] for i in range(3))
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1]))


def _side_lengths(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """(T, 3) length of the side opposite each local vertex."""
    pts = vertices[triangles]
    return np.stack(
        [np.linalg.norm(pts[:, (i + 2) % 3] - pts[:, (i + 1) % 3], axis=1) for i in range(3)],
        axis=1,
    )


def _on_square_boundary(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """True where segment pq lies on one side of the unit square."""
    hits = np.zeros(len(p), dtype=bool)
    for axis in (0, 1):
        for side in (0.0, 1.0):
            hits |= (np.abs(p[:, axis] - side) < _BOUNDARY_TOL) & (np.abs(q[:, axis] - side) < _BOUNDARY_TOL)
    return hits


def unit_square_initial() -> Mesh:
    """Unit square split along both diagonals into four triangles."""
    vertices = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]])
    triangles = np.array([[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]])
    return Mesh(vertices=vertices, triangles=triangles, level=0)


def refine_red(m: Mesh) -> Mesh:
    """Split every triangle into four congruent children through edge midpoints.

    The midpoint of global edge e becomes vertex V + e. Children of triangle k
    are 4k..4k+3, the last one being the inner triangle.
    """
    topo = m.topology
    nv = m.n_vertices
    midpoints = 0.5 * (m.vertices[topo.edges[:, 0]] + m.vertices[topo.edges[:, 1]])
    vertices = np.vstack([m.vertices, midpoints])

    a, b, c = (m.triangles[:, i] for i in range(3))
    mid = nv + topo.cell_edges  # mid[:, i] sits on the edge opposite vertex i
    ma, mb, mc = mid[:, 0], mid[:, 1], mid[:, 2]
    children = np.stack(
        [
            np.stack([a, mc, mb], axis=1),
            np.stack([mc, b, ma], axis=1),
            np.stack([mb, ma, c], axis=1),
            np.stack([ma, mb, mc], axis=1),
        ],
        axis=1,
    ).reshape(-1, 3)
    parent = np.repeat(np.arange(m.n_cells), 4)
    refined = Mesh(vertices=vertices, triangles=children, level=m.level + 1, parent=parent)
    logger.debug(
        "red refinement to level %d: V=%d T=%d",
        refined.level, refined.n_vertices, refined.n_cells,
    )
    return refined


def mesh_hierarchy(levels: int) -> list[Mesh]:
    """Meshes of levels 0..levels."""
    meshes = [unit_square_initial()]
    for _ in range(levels):
        meshes.append(refine_red(meshes[-1]))
    return meshes


def chunkiness(m: Mesh) -> float:
    """max_K h_K / rho_K with rho_K = 2 |K| / perimeter(K)."""
    sides = _side_lengths(m.vertices, m.triangles)
    areas = signed_areas(m.vertices, m.triangles)
    bad = np.flatnonzero(areas <= 0.0)
    if bad.size:
        raise MeshTopologyError(f"degenerate or clockwise triangle {int(bad[0])}")
    rho = 2.0 * areas / sides.sum(axis=1)
    return float((sides.max(axis=1) / rho).max())


def locate_and_adjacency(m: Mesh) -> Topology:
    """Build the edge tables and check conformity."""
    tris = m.triangles
    n_cells = len(tris)
    areas = signed_areas(m.vertices, tris)
    bad = np.flatnonzero(areas <= 0.0)
    if bad.size:
        k = int(bad[0])
        raise MeshTopologyError(
            f"triangle {k} is degenerate or clockwise",
            (int(tris[k, 1]), int(tris[k, 2])),
        )

    # slot s = 3k + i is local edge i of triangle k
    local = np.stack([tris[:, [(i + 1) % 3, (i + 2) % 3]] for i in range(3)], axis=1)
    pairs = np.sort(local.reshape(-1, 2), axis=1)
    edges, inverse, counts = np.unique(pairs, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)

    crowded = np.flatnonzero(counts > 2)
    if crowded.size:
        e = edges[crowded[0]]
        raise MeshTopologyError("edge shared by more than two triangles", (int(e[0]), int(e[1])))

    single = counts == 1
    on_square = _on_square_boundary(m.vertices[edges[:, 0]], m.vertices[edges[:, 1]])
    hanging = np.flatnonzero(single & ~on_square)
    if hanging.size:
        e = edges[hanging[0]]
        raise MeshTopologyError("interior edge with a single adjacent triangle", (int(e[0]), int(e[1])))

    order = np.argsort(inverse, kind="stable")
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    first_slot = order[starts]
    edge_cells = np.full((len(edges), 2), -1, dtype=np.int64)
    edge_cells[:, 0] = first_slot // 3
    shared = np.flatnonzero(~single)
    edge_cells[shared, 1] = order[starts[shared] + 1] // 3

    tangent = m.vertices[edges[:, 1]] - m.vertices[edges[:, 0]]
    normals = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1)
    normals /= np.linalg.norm(normals, axis=1)[:, None]
    opposite = m.vertices[tris[first_slot // 3, first_slot % 3]]
    midpoint = 0.5 * (m.vertices[edges[:, 0]] + m.vertices[edges[:, 1]])
    flip = np.einsum("ij,ij->i", normals, midpoint - opposite) < 0.0
    normals[flip] *= -1.0

    cell_edges = inverse.reshape(n_cells, 3)
    owner = edge_cells[cell_edges, 0]
    cell_edge_sign = np.where(owner == np.arange(n_cells)[:, None], 1, -1)
    cell_edge_dir = np.where(local[:, :, 0] < local[:, :, 1], 1, -1)

    n_v, n_e = m.n_vertices, len(edges)
    if n_v - n_e + n_cells != 1:
        raise MeshTopologyError(f"Euler relation violated: V - E + T = {n_v - n_e + n_cells}")

    boundary_edges = np.flatnonzero(single)
    boundary_vertices = np.unique(edges[boundary_edges].ravel())
    for arr in (edges, edge_cells, normals, cell_edges, cell_edge_sign, cell_edge_dir):
        arr.setflags(write=False)
    return Topology(
        edges=edges,
        edge_cells=edge_cells,
        boundary=single,
        normals=normals,
        cell_edges=cell_edges,
        cell_edge_sign=cell_edge_sign,
        cell_edge_dir=cell_edge_dir,
        boundary_vertices=boundary_vertices,
        boundary_edges=boundary_edges,
    )


def dump_text(m: Mesh) -> str:
    """Plain-text dump: `V T E`, vertex lines, triangle lines, edge lines `i j bflag`."""
    topo = m.topology
    lines = [f"{m.n_vertices} {m.n_cells} {topo.n_edges}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in m.vertices]
    lines += [f"{i} {j} {k}" for i, j, k in m.triangles]
    lines += [f"{i} {j} {int(b)}" for (i, j), b in zip(topo.edges, topo.boundary)]
    return "\n".join(lines) + "\n"
