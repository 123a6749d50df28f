"""Acceptance suite: one test and one printed PASS/FAIL line per criterion."""

import math
import time

import numpy as np
import pytest

from stlw.clustering import clustering_diagnostics, cube_clustering
from stlw.experiments import build_experiment, load_config
from stlw.cli import resolve_config
from stlw.grid import (build_local_timestep_grid, build_moving_vertex_grid, build_perturbed_grid,
                       build_staggered_grid, build_uniform_grid, grid_metrics, insert_remap_layer)
from stlw.initial import InitialData
from stlw.models import burgers, trivial
from stlw.numerics import (GridFunction, cell_balance, entropy_source, kruzkov_entropy_fluxes,
                           lf_scheme, spacetime_lf_scheme, staggered_lf_scheme)
from stlw.properties import verify_flux_properties
from stlw.remap import remap_1d
from stlw.solver import march, march_staggered_streaming
from stlw.verify import (TestFunction, divergence_identity, exact_reference, l1_distance,
                         residual_report, run_once, smoothed_reference)

KRUZKOV_A = (-1.0, -0.5, 0.0, 0.5, 1.0)
COUNTER_HS = (0.1, 0.05, 0.025)


@pytest.fixture
def verdict(capsys):
    """Print one PASS/FAIL line (uncaptured) and fail the test when not ok."""

    def report(n, ok, detail, elapsed, budget):
        ok_time = elapsed < budget
        passed = ok and ok_time
        with capsys.disabled():
            print(f"\n{'PASS' if passed else 'FAIL'} criterion {n}: {detail}; "
                  f"runtime {elapsed:.2f} s (< {budget} s)")
        assert ok, detail
        assert ok_time, f"runtime {elapsed:.2f} s exceeds {budget} s"

    return report


def _experiment(name, **kw):
    return build_experiment(load_config(resolve_config(name)), **kw)


def test_criterion_1_flux_conditions(verdict):
    t0 = time.perf_counter()
    cases = []
    g = build_uniform_grid(0.1, 0.5, 0.5, 0.0, 1.0)
    cases.append(("lax_friedrichs", lf_scheme(burgers(), g, 0.5)))
    s = build_staggered_grid(0.1, 0.01, 0.05, 0.0, 1.0)
    cases.append(("staggered_lax_friedrichs", staggered_lf_scheme(trivial(), s)))
    parts, ok = [], True
    for name, sch in cases:
        rep = verify_flux_properties(sch.flux_def, sch.source_def, sch.grid, sch.model)
        good = (rep.consistency <= 1e-12 and rep.conservativeness == 0.0
                and rep.stencil_radius <= 1.5)
        ok &= good
        parts.append(f"{name} consistency/S={rep.consistency:.2e} "
                     f"conservativeness={rep.conservativeness:g} "
                     f"stencil={rep.stencil_radius:.3f} h_max")
    verdict(1, ok, "; ".join(parts), time.perf_counter() - t0, 5)


def test_criterion_2_discrete_entropy_inequality(verdict):
    t0 = time.perf_counter()
    m = burgers()
    g = build_uniform_grid(0.01, 0.5, 0.5, -1.0, 2.0)
    sch = lf_scheme(m, g, 0.5)
    r = march(g, sch, m, InitialData.riemann(1.0, 0.0))
    worst = {}
    for a in KRUZKOV_A:
        flux, pair = kruzkov_entropy_fluxes(sch, a)
        res = cell_balance(flux, r.solution, entropy_source(sch, pair))[sch.closed, 0]
        worst[a] = float(res.max())
    ok = all(v <= 1e-12 for v in worst.values())
    detail = "max entropy balance " + ", ".join(f"a={a:g}: {v:.2e}" for a, v in worst.items())
    verdict(2, ok, detail + " (need <= 1e-12)", time.perf_counter() - t0, 10)


def test_criterion_3_weak_residual_convergence(verdict):
    t0 = time.perf_counter()
    exp = _experiment("lax_friedrichs_shock")
    interior = [phi for phi in exp.battery if phi.tmin > 0]
    assert len(interior) == 5
    exp.battery = interior
    exp.entropy_a = ()
    runs = [run_once(exp, h) for h in (0.04, 0.02, 0.01)]
    weak = [r.residuals.max_weak for r in runs]
    l1 = [r.l1_error for r in runs]
    shrink = [a / b for a, b in zip(l1, l1[1:])]
    ok = (all(a > b for a, b in zip(weak, weak[1:])) and weak[-1] <= 0.5 * weak[0]
          and all(s >= 1.3 for s in shrink))
    detail = (f"max|weak| {', '.join(f'{w:.3e}' for w in weak)} "
              f"(final/initial {weak[-1] / weak[0]:.3f} <= 0.5); "
              f"L1 {', '.join(f'{e:.4f}' for e in l1)} "
              f"(shrink {', '.join(f'{s:.2f}' for s in shrink)} >= 1.3)")
    verdict(3, ok, detail, time.perf_counter() - t0, 30)


def test_criterion_4_entropy_selection(verdict):
    # The a = 1 residual measures about 1.5e-3 at h = 0.01 (see the decisions ledger); this
    # criterion is reported as failing rather than loosened.
    t0 = time.perf_counter()
    exp = _experiment("lax_friedrichs_rarefaction")
    exp.entropy_a = KRUZKOV_A
    r = run_once(exp, 0.01)
    ent = {}
    for (a, _), v in r.residuals.entropy.items():
        ent[a] = max(ent.get(a, -np.inf), v)
    ok = r.l1_error <= 0.05 and all(v <= 1e-3 for v in ent.values())
    detail = (f"L1 {r.l1_error:.4f} (<= 0.05); max entropy residual "
              + ", ".join(f"a={a:g}: {v:.2e}" for a, v in sorted(ent.items()))
              + " (need <= 1e-3)")
    verdict(4, ok, detail, time.perf_counter() - t0, 15)


def test_criterion_5_counterexample(verdict):
    t0 = time.perf_counter()
    u0 = InitialData.indicator(0.0, 1.0)
    truth = exact_reference("trivial_indicator", a=0.0, b=1.0).at(1.0)
    window = (-15.0, 16.0)
    smooth, true, quasi = [], [], []
    for h in COUNTER_HS:
        dt = h**3
        res = march_staggered_streaming(h, dt, 1.0, -20.0, 21.0, u0)
        smooth.append(l1_distance(res.profile, smoothed_reference(1.0, h, u0), window))
        true.append(l1_distance(res.profile, truth, window))
        # the ratio depends on h and dt only, so a four-layer slab suffices
        quasi.append(grid_metrics(build_staggered_grid(h, dt, 4 * dt, -20.0, 21.0)).quasi_ratio)
    fall = [a / b for a, b in zip(quasi, quasi[1:])]
    norm = u0.l1_norm()
    ok = (all(s <= 0.1 * norm for s in smooth) and true[-1] >= 0.5
          and all(b >= a for a, b in zip(true, true[1:]))
          and all(abs(f - 4.0) <= 0.4 for f in fall))
    detail = (f"(a) L1 to smoothed {', '.join(f'{s:.4f}' for s in smooth)} (<= {0.1 * norm:g}); "
              f"(b) L1 to indicator {', '.join(f'{t:.3f}' for t in true)} (>= 0.5, non-decreasing); "
              f"(c) quasi_ratio falls {', '.join(f'{f:.3f}' for f in fall)}x (4 +- 10%)")
    verdict(5, ok, detail, time.perf_counter() - t0, 60)


def test_criterion_6_quasiuniform_control(verdict):
    t0 = time.perf_counter()
    u0 = InitialData.indicator(0.0, 1.0)
    truth = exact_reference("trivial_indicator", a=0.0, b=1.0).at(1.0)
    l1 = []
    for h in COUNTER_HS:
        res = march_staggered_streaming(h, 0.5 * h, 1.0, -2.0, 3.0, u0)
        l1.append(l1_distance(res.profile, truth, (-1.0, 2.0)))
    shrink = [a / b for a, b in zip(l1, l1[1:])]
    ok = all(s >= 1.2 for s in shrink)
    detail = (f"dt = h/2: L1 to indicator {', '.join(f'{e:.4f}' for e in l1)} "
              f"(shrink {', '.join(f'{s:.3f}' for s in shrink)} >= 1.2)")
    verdict(6, ok, detail, time.perf_counter() - t0, 10)


def test_criterion_7_remap_conservation(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    worst_mass, worst_const = 0.0, 0.0
    for _ in range(20):
        old = np.sort(np.concatenate([[0.0, 1.0], rng.uniform(0, 1, rng.integers(3, 30))]))
        new = np.sort(np.concatenate([[0.0, 1.0], rng.uniform(0, 1, rng.integers(3, 30))]))
        u = rng.uniform(-1, 1, len(old) - 1)
        before = math.fsum(u * np.diff(old))
        for rec in ("constant", "minmod"):
            r = remap_1d(old[:-1], old[1:], u, new[:-1], new[1:], rec)
            after = math.fsum(r.values[:, 0] * np.diff(new))
            worst_mass = max(worst_mass, abs(after - before) / max(1.0, abs(before)))
            c = remap_1d(old[:-1], old[1:], np.full(len(u), 0.37), new[:-1], new[1:], rec)
            worst_const = max(worst_const, float(np.abs(c.values - 0.37).max()))
    # full march: Burgers data well inside the slab, one seeded remap layer
    m = burgers()
    g0 = build_uniform_grid(0.02, 0.5, 0.5, -1.0, 2.0)
    t_remap = g0.time_extent()[0][g0.layers[12]].min()
    # seeded jittered partition with new cells about 1.3 h wide (CFL-admissible)
    n = int(3.0 / (1.3 * 0.02))
    cuts = np.linspace(-1.0, 2.0, n + 1)
    cuts[1:-1] += rng.uniform(-0.1, 0.1, n - 1) * (3.0 / n)
    g = insert_remap_layer(g0, t_remap, cuts)
    sch = spacetime_lf_scheme(m, g, alpha=1.0, reconstruction="minmod")
    run = march(g, sch, m, InitialData.piecewise_constant([0.0, 0.5, 1.0], [1.0, -0.5]))
    M = run.per_layer_mass[:, 0]
    march_drift = float(np.abs(M - M[0]).max() / max(1.0, abs(M[0])))
    ok = worst_mass <= 1e-12 and worst_const == 0.0 and march_drift <= 1e-12
    detail = (f"relative mass defect {worst_mass:.2e} (<= 1e-12); constant error {worst_const:g} "
              f"(exact); march with remap layer mass drift {march_drift:.2e} (<= 1e-12)")
    verdict(7, ok, detail, time.perf_counter() - t0, 5)


def test_criterion_8_cube_clustering(verdict):
    t0 = time.perf_counter()
    rhos = (1 / 4, 1 / 8, 1 / 16)
    diag = np.array([[clustering_diagnostics(cube_clustering(
        build_perturbed_grid(rho, 4.0, 0.0, 4.0, seed=seed), 1.0)) for rho in rhos]
        for seed in range(8)])
    mean = diag.mean(axis=0)
    ratio = mean[:-1] / mean[1:]
    ok = bool(np.all(ratio >= 1.5))
    detail = (f"8-seed means corner_fraction {', '.join(f'{v:.4f}' for v in mean[:, 0])} "
              f"(ratios {', '.join(f'{v:.2f}' for v in ratio[:, 0])}); max_normal_defect "
              f"{', '.join(f'{v:.4f}' for v in mean[:, 1])} "
              f"(ratios {', '.join(f'{v:.2f}' for v in ratio[:, 1])}) (>= 1.5)")
    verdict(8, ok, detail, time.perf_counter() - t0, 20)


def _family_grids():
    wave = lambda t, x: 0.1 * math.sin(math.pi * x)
    return {
        "uniform": build_uniform_grid(0.05, 0.5, 0.5, 0.0, 1.0),
        "staggered": build_staggered_grid(0.05, 0.01, 0.5, 0.0, 1.0),
        "local_timestep": build_local_timestep_grid(0.05, 0.5, (0.4, 0.6), 2, 0.5, 0.0, 1.0),
        "moving": build_moving_vertex_grid(0.05, 0.5, 0.5, 0.0, 1.0, wave),
        "perturbed": build_perturbed_grid(0.05, 0.5, 0.0, 1.0, seed=1),
        "remap": insert_remap_layer(build_uniform_grid(0.05, 0.5, 0.5, 0.0, 1.0), 0.25,
                                    np.linspace(0.0, 1.0, 16)),
    }


def test_criterion_9_divergence_identity_and_guard(verdict):
    t0 = time.perf_counter()
    m = burgers()
    u0 = InitialData.riemann(0.8, -0.2, 0.5)
    inside = [TestFunction((0.25, 0.5), 0.2), TestFunction((0.2, 0.45), 0.15)]
    battery = inside + [TestFunction((0.0, 0.5), 0.2)]
    ident, guard, parts = 0.0, 0.0, []
    for name, g in _family_grids().items():
        d = max(divergence_identity(g, phi) for phi in inside)
        # a deterministic non-constant grid function
        c = g.centroid
        vals = 0.5 * np.sin(3.0 * c[:, 1] + 2.0 * c[:, 0])
        rep = residual_report(GridFunction(g, vals, u0), m, u0, battery, quad_refine=True)
        ident, guard = max(ident, d), max(guard, rep.refinement_defect)
        parts.append(f"{name} {d:.1e}/{rep.refinement_defect:.1e}")
    ok = ident <= 1e-12 and guard <= 1e-10
    detail = (f"identity/guard per family: {', '.join(parts)} "
              f"(identity <= 1e-12, guard <= 1e-10 (1+|R|))")
    verdict(9, ok, detail, time.perf_counter() - t0, 20)
