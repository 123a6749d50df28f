import numpy as np
import pytest

from stlw.quadrature import (gauss_legendre, integrate_interval, polygon_rule, segment_rule,
                             triangle_rule)


def test_gauss_legendre_exact_for_polynomials():
    x, w = gauss_legendre(5)
    assert w.sum() == pytest.approx(1.0, abs=1e-15)
    for k in range(10):
        assert (w * x**k).sum() == pytest.approx(1.0 / (k + 1), abs=1e-14)


def test_segment_rule_length_and_line_integral():
    p0, p1 = np.array([0.0, 0.0]), np.array([3.0, 4.0])
    pts, w = segment_rule(p0, p1, segments=3, points=4)
    assert w.sum() == pytest.approx(5.0, abs=1e-14)
    # integral of t along the segment = 5 * mean(t) = 7.5
    assert (w * pts[:, 0]).sum() == pytest.approx(7.5, abs=1e-13)


def test_integrate_interval_splits_at_breaks():
    g = lambda x: np.where(x < 0.3, 1.0, 2.0)
    assert integrate_interval(g, 0.0, 1.0, breaks=[0.3]) == pytest.approx(0.3 + 1.4, abs=1e-15)


def test_integrate_interval_empty():
    assert integrate_interval(lambda x: x, 1.0, 1.0) == 0.0


def test_triangle_and_polygon_area():
    pts, w = triangle_rule([0, 0], [1, 0], [0, 1])
    assert w.sum() == pytest.approx(0.5, abs=1e-15)
    assert (w * pts[:, 0] * pts[:, 1]).sum() == pytest.approx(1.0 / 24, abs=1e-15)
    square = [[0, 0], [2, 0], [2, 1], [0, 1]]
    pts, w = polygon_rule(square)
    assert w.sum() == pytest.approx(2.0, abs=1e-14)
    assert (w * pts[:, 0] ** 2).sum() == pytest.approx(8.0 / 3.0, abs=1e-13)
