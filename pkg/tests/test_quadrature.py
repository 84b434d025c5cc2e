import math

import numpy as np
import pytest

from nsfem.core.errors import DomainError
from nsfem.fem.quadrature import MAX_DEGREE, edge_quadrature, triangle_quadrature


def _monomial_integral(a, b):
    # int over the reference triangle of x^a y^b
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


class TestTriangleQuadrature:
    def test_degree_one_is_centroid_rule(self):
        rule = triangle_quadrature(1)
        assert len(rule) == 1
        np.testing.assert_allclose(rule.points[0], [1.0 / 3.0, 1.0 / 3.0], rtol=1e-14)
        assert rule.weights[0] == pytest.approx(0.5, rel=1e-15)

    def test_linear_integral(self):
        rule = triangle_quadrature(1)
        assert rule.weights @ rule.points.sum(axis=1) == pytest.approx(1.0 / 3.0, rel=1e-14)

    def test_x4y4_oracle(self):
        rule = triangle_quadrature(8)
        x, y = rule.points[:, 0], rule.points[:, 1]
        assert rule.weights @ (x**4 * y**4) == pytest.approx(1.0 / 6300.0, abs=1e-14)

    @pytest.mark.parametrize("degree", range(1, MAX_DEGREE + 1))
    def test_exact_for_all_monomials(self, degree):
        rule = triangle_quadrature(degree)
        x, y = rule.points[:, 0], rule.points[:, 1]
        for a in range(degree + 1):
            for b in range(degree + 1 - a):
                assert rule.weights @ (x**a * y**b) == pytest.approx(_monomial_integral(a, b), rel=1e-12, abs=1e-15)

    @pytest.mark.parametrize("degree", range(1, MAX_DEGREE + 1))
    def test_points_inside_and_weights_positive(self, degree):
        rule = triangle_quadrature(degree)
        assert np.all(rule.weights > 0.0)
        assert np.all(rule.barycentric > 0.0)
        np.testing.assert_allclose(rule.barycentric.sum(axis=1), 1.0)

    @pytest.mark.parametrize("degree", [0, 13, 2.5])
    def test_unsupported_degree(self, degree):
        with pytest.raises(DomainError, match="1..12"):
            triangle_quadrature(degree)


class TestEdgeQuadrature:
    def test_midpoint(self):
        rule = edge_quadrature(1)
        np.testing.assert_allclose(rule.points, [0.5])
        np.testing.assert_allclose(rule.weights, [1.0])

    def test_s_squared(self):
        rule = edge_quadrature(3)
        assert rule.weights @ rule.points**2 == pytest.approx(1.0 / 3.0, rel=1e-14)

    def test_s_fifth(self):
        rule = edge_quadrature(5)
        assert rule.weights @ rule.points**5 == pytest.approx(1.0 / 6.0, rel=1e-14)

    def test_unsupported_degree(self):
        with pytest.raises(DomainError):
            edge_quadrature(20)
