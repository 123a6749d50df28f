import numpy as np
import pytest

from stlw.grid import (build_local_timestep_grid, build_staggered_grid, build_uniform_grid,
                       insert_remap_layer)
from stlw.models import burgers, selfsimilar, trivial
from stlw.numerics import (BiasedFlux, kruzkov_entropy_fluxes, lf_scheme, spacetime_lf_scheme,
                           staggered_lf_scheme)
from stlw.properties import verify_flux_properties


def _report(scheme, flux=None):
    return verify_flux_properties(flux or scheme.flux_def, scheme.source_def, scheme.grid,
                                  scheme.model)


def test_lf_properties_pass():
    m = burgers()
    g = build_uniform_grid(0.1, 0.5, 0.3, 0.0, 1.0)
    rep = _report(lf_scheme(m, g, 0.5))
    assert rep.ok
    assert rep.consistency <= 1e-12
    assert rep.conservativeness == 0.0
    assert rep.stencil_radius <= 1.5


def test_staggered_and_lts_properties_pass():
    s = build_staggered_grid(0.1, 0.01, 0.03, 0.0, 1.0)
    assert _report(staggered_lf_scheme(trivial(), s)).ok
    g = build_local_timestep_grid(0.1, 0.5, (0.4, 0.6), 2, 0.3, 0.0, 1.0)
    assert _report(spacetime_lf_scheme(burgers(), g)).ok


def test_remap_and_selfsimilar_properties_pass():
    g = insert_remap_layer(build_uniform_grid(0.1, 0.5, 0.3, 0.0, 1.0), 0.15,
                           np.linspace(0.0, 1.0, 8))
    assert _report(spacetime_lf_scheme(burgers(), g, reconstruction="minmod")).ok
    g = build_uniform_grid(0.1, 0.25, 0.3, 0.0, 1.0)
    rep = _report(spacetime_lf_scheme(selfsimilar(burgers()), g))
    assert rep.ok
    assert rep.source_consistency <= 1e-12


def test_kruzkov_flux_consistent_with_entropy_field():
    m = burgers()
    g = build_uniform_grid(0.1, 0.5, 0.3, 0.0, 1.0)
    s = lf_scheme(m, g, 0.5)
    flux, _ = kruzkov_entropy_fluxes(s, 0.2)
    assert _report(s, flux).passed["consistency"]


def test_planted_bias_flagged():
    m = burgers()
    g = build_uniform_grid(0.1, 0.5, 0.3, 0.0, 1.0)
    s = lf_scheme(m, g, 0.5)
    rep = _report(s, BiasedFlux(s.flux_def, 0.01))
    assert not rep.passed["conservativeness"]
    assert rep.conservativeness == pytest.approx(0.01, rel=1e-12)
    names = [r[0] for r in rep.rows()]
    assert names[:2] == ["consistency", "conservativeness"]
