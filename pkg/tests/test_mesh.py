import math

import numpy as np
import pytest

from nsfem.core.errors import MeshTopologyError
from nsfem.fem.mesh import (
    Mesh,
    chunkiness,
    dump_text,
    locate_and_adjacency,
    mesh_hierarchy,
    refine_red,
    unit_square_initial,
)

RIGHT_ISOSCELES_CHUNKINESS = math.sqrt(2.0) * (2.0 + math.sqrt(2.0))


def _sorted_sides(m, k):
    pts = m.vertices[m.triangles[k]]
    return np.sort([np.linalg.norm(pts[i] - pts[(i + 1) % 3]) for i in range(3)])


class TestInitialMesh:
    def test_counts(self, initial_mesh):
        assert (initial_mesh.n_vertices, initial_mesh.n_cells, initial_mesh.n_edges) == (5, 4, 8)
        assert initial_mesh.n_vertices - initial_mesh.n_edges + initial_mesh.n_cells == 1

    def test_corner_corner_center(self, initial_mesh):
        center = 4
        corners = {0, 1, 2, 3}
        for tri in initial_mesh.triangles:
            assert center in tri
            assert len(corners.intersection(tri)) == 2

    def test_boundary_and_interior_edges(self, initial_mesh):
        topo = initial_mesh.topology
        assert topo.boundary.sum() == 4
        assert len(topo.interior_edges) == 4
        np.testing.assert_array_equal(topo.boundary_vertices, [0, 1, 2, 3])

    def test_counterclockwise(self, initial_mesh):
        assert np.all(initial_mesh.areas > 0.0)
        assert initial_mesh.areas.sum() == pytest.approx(1.0)


class TestRefinement:
    def test_one_refinement(self, level1_mesh):
        m = level1_mesh
        assert (m.n_vertices, m.n_cells, m.n_edges) == (13, 16, 28)
        assert m.level == 1
        assert m.h == 0.5

    def test_two_refinements(self, level2_mesh):
        assert level2_mesh.n_cells == 64
        assert level2_mesh.h == 0.25
        assert level2_mesh.n_vertices - level2_mesh.n_edges + level2_mesh.n_cells == 1

    def test_children_similar_to_grandparent(self):
        meshes = mesh_hierarchy(2)
        coarse, mid, fine = meshes
        for k in range(fine.n_cells):
            grandparent = mid.parent[fine.parent[k]]
            ratio = _sorted_sides(fine, k) / _sorted_sides(coarse, grandparent)
            np.testing.assert_allclose(ratio, 0.25, rtol=1e-14)
            assert fine.areas[k] == pytest.approx(coarse.areas[grandparent] / 16.0, rel=1e-14)

    def test_midpoint_numbering(self, initial_mesh, level1_mesh):
        edges = initial_mesh.edges
        midpoints = level1_mesh.vertices[initial_mesh.n_vertices:]
        np.testing.assert_allclose(midpoints, 0.5 * (initial_mesh.vertices[edges[:, 0]] + initial_mesh.vertices[edges[:, 1]]))

    def test_true_diameter(self, level2_mesh):
        assert level2_mesh.diameter == pytest.approx(0.25)


class TestChunkiness:
    def test_right_isosceles_triangle(self):
        m = Mesh(vertices=np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), triangles=np.array([[0, 1, 2]]))
        assert chunkiness(m) == pytest.approx(RIGHT_ISOSCELES_CHUNKINESS, rel=1e-14)

    def test_invariant_under_red_refinement(self):
        for m in mesh_hierarchy(3):
            assert chunkiness(m) == pytest.approx(RIGHT_ISOSCELES_CHUNKINESS, rel=1e-12)

    def test_degenerate_triangle(self):
        m = Mesh(vertices=np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]), triangles=np.array([[0, 1, 2]]))
        with pytest.raises(MeshTopologyError):
            chunkiness(m)


class TestTopology:
    def test_three_edges_per_cell(self, level1_mesh):
        cell_edges = level1_mesh.topology.cell_edges
        assert cell_edges.shape == (16, 3)
        assert all(len(set(row)) == 3 for row in cell_edges)

    def test_signed_incidences_cancel_on_interior_edges(self, level2_mesh):
        topo = level2_mesh.topology
        totals = np.zeros(topo.n_edges)
        np.add.at(totals, topo.cell_edges.ravel(), topo.cell_edge_sign.ravel())
        np.testing.assert_array_equal(totals[topo.interior_edges], 0.0)
        np.testing.assert_array_equal(totals[topo.boundary_edges], 1.0)

    def test_boundary_normals_point_outward(self, level2_mesh):
        topo = level2_mesh.topology
        mids = 0.5 * (level2_mesh.vertices[topo.edges[:, 0]] + level2_mesh.vertices[topo.edges[:, 1]])
        outward = np.einsum("ij,ij->i", topo.normals[topo.boundary_edges], mids[topo.boundary_edges] - 0.5)
        assert np.all(outward > 0.0)
        np.testing.assert_allclose(np.linalg.norm(topo.normals, axis=1), 1.0)

    def test_lexicographic_edges(self, level1_mesh):
        edges = level1_mesh.edges
        assert np.all(edges[:, 0] < edges[:, 1])
        keys = edges[:, 0] * level1_mesh.n_vertices + edges[:, 1]
        assert np.all(np.diff(keys) > 0)

    def test_deterministic(self):
        a = locate_and_adjacency(refine_red(unit_square_initial()))
        b = locate_and_adjacency(refine_red(unit_square_initial()))
        np.testing.assert_array_equal(a.edges, b.edges)
        np.testing.assert_array_equal(a.cell_edge_sign, b.cell_edge_sign)
        np.testing.assert_array_equal(a.normals, b.normals)

    def test_edge_shared_by_three_triangles(self):
        vertices = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 0.5], [0.5, -0.5], [0.3, 0.8]])
        triangles = np.array([[0, 1, 2], [1, 0, 3], [0, 1, 4]])
        with pytest.raises(MeshTopologyError) as excinfo:
            locate_and_adjacency(Mesh(vertices=vertices, triangles=triangles))
        assert excinfo.value.edge == (0, 1)

    def test_hanging_interior_edge(self):
        m = Mesh(vertices=np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), triangles=np.array([[0, 1, 2]]))
        with pytest.raises(MeshTopologyError) as excinfo:
            locate_and_adjacency(m)
        assert excinfo.value.edge == (1, 2)

    def test_clockwise_triangle(self):
        m = Mesh(vertices=np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), triangles=np.array([[0, 2, 1]]))
        with pytest.raises(MeshTopologyError, match="clockwise"):
            locate_and_adjacency(m)


def test_dump_text(initial_mesh):
    lines = dump_text(initial_mesh).splitlines()
    assert lines[0] == "5 4 8"
    assert len(lines) == 1 + 5 + 4 + 8
    assert lines[-1].split()[2] in ("0", "1")
