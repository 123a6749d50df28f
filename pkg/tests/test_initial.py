import numpy as np
import pytest

from stlw.initial import InitialData


def test_constant_average():
    u0 = InitialData.constant(0.7)
    assert u0.cell_averages([0.0], [1.0])[0, 0] == pytest.approx(0.7, abs=1e-15)


def test_indicator_on_coarse_cells_is_exact():
    u0 = InitialData.indicator(0.0, 1.0)
    edges = np.arange(-0.6, 1.6, 0.3)
    avg = u0.cell_averages(edges[:-1], edges[1:])[:, 0]
    mass = (avg * np.diff(edges)).sum()
    assert abs(mass - 1.0) <= 1e-14


def test_riemann_evaluation_and_integral():
    u0 = InitialData.riemann(1.0, 0.0, x0=0.25)
    assert u0([0.0, 0.5])[:, 0].tolist() == [1.0, 0.0]
    assert u0.integrate(-1.0, 1.0)[0] == pytest.approx(1.25, abs=1e-15)


def test_piecewise_linear_integral():
    u0 = InitialData.piecewise_linear([0.0, 1.0], [(0.0, 2.0)], outside=0.0)
    assert u0.integrate(-1.0, 2.0)[0] == pytest.approx(1.0, abs=1e-15)
    assert u0([0.5])[0, 0] == pytest.approx(1.0, abs=1e-15)


def test_l1_norm_and_validation():
    assert InitialData.indicator(0, 1).l1_norm() == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        InitialData.piecewise_constant([0, 1, 2], [1.0])
