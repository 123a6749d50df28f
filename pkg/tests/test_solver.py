import numpy as np
import pytest

from stlw.grid import build_staggered_grid, build_uniform_grid
from stlw.initial import InitialData
from stlw.models import burgers, trivial
from stlw.numerics import SchemeError, lf_scheme, staggered_lf_scheme
from stlw.solver import (InadmissibleStateError, layer_profile, march, march_staggered_streaming,
                         solution_profile, total_mass, write_solution_csv)


def test_burgers_window_mass_gains_inflow():
    # u = 1 flows in at x = 0 and u = 0 leaves nothing at x = 1: mass grows by f(1) t
    m = burgers(0.0, 1.0)
    g = build_uniform_grid(0.01, 0.5, 0.5, -1.0, 2.0)
    r = march(g, lf_scheme(m, g, 0.5), m, InitialData.riemann(1.0, 0.0, 0.0))
    p = solution_profile(r.solution, 0.5)
    mid = 0.5 * (p.lo + p.hi)
    sel = (mid > 0.0) & (mid < 1.0)
    mass = ((p.hi - p.lo)[sel] * p.u[sel, 0]).sum()
    assert mass == pytest.approx(0.25, abs=0.02)


def test_per_layer_mass_constant_away_from_boundaries():
    m = burgers()
    g = build_uniform_grid(0.05, 0.5, 0.5, -2.0, 3.0)
    r = march(g, lf_scheme(m, g, 0.5), m, InitialData.indicator(0.0, 1.0))
    assert np.ptp(r.per_layer_mass) <= 1e-13
    assert r.per_layer_mass[0, 0] == pytest.approx(1.0, abs=1e-14)
    assert r.max_balance_residual <= 1e-14


def test_trivial_staggered_averages_indicator():
    m = trivial()
    g = build_staggered_grid(0.25, 0.01, 0.02, -1.0, 2.0)
    r = march(g, staggered_lf_scheme(m, g), m, InitialData.indicator(0.0, 1.0))
    p = layer_profile(r.solution, 1)
    assert p.u[:, 0].tolist() == [0, 0, 0, 0, 0.5, 1, 1, 1, 0.5, 0, 0, 0, 0]
    assert (p.u[:, 0] * (p.hi - p.lo)).sum() == pytest.approx(1.0, abs=1e-15)


def test_streaming_matches_full_march():
    h, dt, T = 0.1, 0.01, 0.13
    m = trivial()
    u0 = InitialData.indicator(0.0, 1.0)
    g = build_staggered_grid(h, dt, T, -1.0, 2.0)
    r = march(g, staggered_lf_scheme(m, g), m, u0)
    s = march_staggered_streaming(h, dt, T, -1.0, 2.0, u0)
    p = layer_profile(r.solution, len(g.layers) - 1)
    assert s.nlayers == len(g.layers)
    assert np.array_equal(s.profile.u, p.u)
    assert np.array_equal(s.profile.lo, p.lo)
    assert np.array_equal(s.per_layer_mass, r.per_layer_mass)


def test_inadmissible_state_names_cell():
    m = burgers(0.0, 1.0)
    g = build_uniform_grid(0.1, 0.5, 0.5, 0.0, 1.0)
    with pytest.raises(InadmissibleStateError) as e:
        march(g, lf_scheme(m, g, 0.5), m, InitialData.constant(2.0))
    assert e.value.layer == 0


def test_march_rejects_foreign_scheme():
    m = burgers()
    g1 = build_uniform_grid(0.1, 0.5, 0.5, 0.0, 1.0)
    g2 = build_uniform_grid(0.1, 0.5, 0.5, 0.0, 1.0)
    with pytest.raises(SchemeError):
        march(g2, lf_scheme(m, g1, 0.5), m, InitialData.constant(0.0))


def test_total_mass_and_csv(tmp_path):
    m = burgers()
    g = build_uniform_grid(0.25, 0.5, 0.25, 0.0, 1.0)
    r = march(g, lf_scheme(m, g, 0.5), m, InitialData.constant(0.5))
    assert total_mass(r.solution, 1)[0] == pytest.approx(0.5, abs=1e-15)
    path = tmp_path / "sol.csv"
    write_solution_csv(path, r.solution)
    lines = path.read_text().splitlines()
    assert lines[0] == "layer,cell_id,t_mid,x_mid,u_1"
    assert len(lines) == g.ncells + 1
