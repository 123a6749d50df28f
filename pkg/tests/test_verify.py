import math

import numpy as np
import pytest
from scipy.integrate import quad

from stlw.grid import build_uniform_grid
from stlw.initial import InitialData
from stlw.models import burgers, kruzkov_pair
from stlw.numerics import GridFunction, lf_scheme
from stlw.solver import Profile, march
from stlw.verify import (ReferenceError, SupportError, TestFunction, check_support,
                         default_battery, divergence_identity, entropy_residual, exact_reference,
                         l1_distance, residual_report, smoothed_reference, weak_residual)


def test_bump_gradient_matches_finite_differences():
    phi = TestFunction((0.3, 0.5), 0.2)
    t, x = np.array([0.35, 0.25]), np.array([0.45, 0.6])
    e = 1e-6
    fd_t = (phi(t + e, x) - phi(t - e, x)) / (2 * e)
    fd_x = (phi(t, x + e) - phi(t, x - e)) / (2 * e)
    g = phi.grad(t, x)
    assert np.abs(g[:, 0] - fd_t).max() <= 1e-7
    assert np.abs(g[:, 1] - fd_x).max() <= 1e-7
    assert phi(np.array([0.3]), np.array([0.71]))[0] == 0.0


def test_default_battery_fits_slab():
    g = build_uniform_grid(0.02, 0.5, 0.5, -1.0, 2.0)
    bat = default_battery(0.5, -1.0, 2.0, focus=0.125)
    assert len(bat) == 7
    for phi in bat:
        check_support(g, phi)
    assert sum(phi.tmin < 0 for phi in bat) == 2


def test_support_errors():
    g = build_uniform_grid(0.1, 0.5, 0.5, 0.0, 1.0)
    with pytest.raises(SupportError, match="top"):
        weak_residual(GridFunction.constant(g, 0.0), burgers(), InitialData.constant(0.0),
                      TestFunction((0.4, 0.5), 0.2))
    with pytest.raises(SupportError, match="lateral"):
        check_support(g, TestFunction((0.2, 0.05), 0.1))


def test_constant_solution_has_zero_residual():
    g = build_uniform_grid(0.05, 0.5, 0.5, -1.0, 2.0)
    m = burgers()
    u0 = InitialData.constant(0.4)
    gf = GridFunction(g, np.full(g.ncells, 0.4), u0)
    for phi in default_battery(0.5, -1.0, 2.0, 0.5):
        assert abs(weak_residual(gf, m, u0, phi)) <= 1e-14


def test_initial_mismatch_residual_oracle():
    # u = c for t > 0 against u0 = d leaves (d - c) * int phi(0, x) dx
    g = build_uniform_grid(0.05, 0.5, 0.5, -1.0, 2.0)
    phi = TestFunction((0.0, 0.5), 0.3)
    mass, _ = quad(lambda x: math.exp(-1.0 / (1.0 - (x / 0.3) ** 2)), -0.3, 0.3, epsabs=1e-14)
    u0 = InitialData.constant(0.7)
    gf = GridFunction(g, np.full(g.ncells, 0.2), u0)
    assert abs(weak_residual(gf, burgers(), u0, phi)) == pytest.approx(0.5 * mass, rel=1e-10)


def test_linear_entropy_is_minus_weak_residual():
    m = burgers(0.0, 1.0)
    g = build_uniform_grid(0.05, 0.5, 0.5, -1.0, 2.0)
    u0 = InitialData.riemann(0.0, 1.0)
    r = march(g, lf_scheme(m, g, 0.5), m, u0)
    phi = default_battery(0.5, -1.0, 2.0, 0.125)[2]
    w = weak_residual(r.solution, m, u0, phi)
    e = entropy_residual(r.solution, m, kruzkov_pair(m, 1.0), u0, phi)
    assert abs(w + e) <= 1e-14


def test_residual_report_and_quadrature_guard():
    m = burgers()
    g = build_uniform_grid(0.04, 0.5, 0.5, -1.0, 2.0)
    u0 = InitialData.riemann(1.0, 0.0)
    r = march(g, lf_scheme(m, g, 0.5), m, u0)
    rep = residual_report(r.solution, m, u0, default_battery(0.5, -1.0, 2.0, 0.125),
                          entropy_a=(0.0, 0.5), quad_refine=True)
    assert len(rep.weak) == 7 and len(rep.entropy) == 14
    assert rep.refinement_defect <= 1e-6
    assert abs(rep.weak[rep.worst_weak()]) == rep.max_weak


def test_divergence_identity_uniform():
    g = build_uniform_grid(0.1, 0.5, 0.5, 0.0, 1.0)
    assert divergence_identity(g, TestFunction((0.25, 0.5), 0.2)) <= 1e-15


def test_exact_references():
    shock = exact_reference("burgers_shock", uL=1.0, uR=0.0).at(0.5)
    assert shock(np.array([0.2, 0.3]))[0] == 1.0 and shock(np.array([0.3]))[0] == 0.0
    assert shock.breaks == (0.25,)
    fan = exact_reference("burgers_rarefaction", uL=0.0, uR=1.0).at(0.5)
    assert fan(np.array([-0.1, 0.25, 0.7])).tolist() == [0.0, 0.5, 1.0]
    adv = exact_reference("advection", c=2.0, u0=InitialData.indicator(0, 1)).at(0.25)
    assert adv(np.array([0.4, 0.6]))[0] == 0.0 and adv.breaks == (0.5, 1.5)
    with pytest.raises(ReferenceError):
        exact_reference("burgers_shock", uL=0.0, uR=1.0)
    with pytest.raises(ReferenceError):
        exact_reference("euler")


def test_smoothed_reference_value():
    # variance t/(4h) = 5 at the midpoint of the unit indicator
    s = smoothed_reference(2.0, 0.1, InitialData.indicator(0.0, 1.0))
    expect = math.erf(0.5 / math.sqrt(10.0))
    assert s(np.array([0.5]))[0] == pytest.approx(expect, abs=1e-14)
    total, _ = quad(lambda x: s(np.array([x]))[0], -60, 61, limit=200)
    assert total == pytest.approx(1.0, abs=1e-9)


def test_l1_distance_examples():
    ind = exact_reference("trivial_indicator", a=0.0, b=0.5).at(1.0)
    zero = Profile(np.array([0.0, 0.5]), np.array([0.5, 1.0]), np.zeros((2, 1)))
    assert l1_distance(zero, ind, (0.0, 1.0)) == pytest.approx(0.5, abs=1e-15)
    half = Profile(np.array([0.0]), np.array([1.0]), np.full((1, 1), 0.5))
    assert l1_distance(half, ind, (0.0, 1.0)) == pytest.approx(0.5, abs=1e-15)
    fan = exact_reference("burgers_rarefaction", uL=0.0, uR=1.0).at(1.0)
    # |0.5 - x| on [0, 1] integrates to 1/4
    assert l1_distance(half, fan, (0.0, 1.0)) == pytest.approx(0.25, abs=1e-15)
