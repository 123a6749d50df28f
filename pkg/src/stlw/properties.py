"""Empirical checks of the numerical flux and source conditions."""

from dataclasses import dataclass, field

import numpy as np

from .grid import grid_metrics
from .initial import InitialData
from .numerics import (GridFunction, cell_source_integral, conservation_field,
                       face_integrals)


@dataclass
class PropertyReport:
    """Measured defects per condition and their pass/fail verdicts.

    ``stencil_radius`` is in units of h_max. ``continuity`` maps the
    perturbation size delta to the largest flux deviation per unit face
    measure; it is a diagnostic and does not enter ``passed``.
    """

    consistency: float
    conservativeness: float
    stencil_radius: float
    boundedness: float
    continuity: dict
    source_consistency: float
    tol: float
    stencil_limit: float
    passed: dict = field(default_factory=dict)

    @property
    def ok(self):
        return all(self.passed.values())

    def rows(self):
        """(condition, value, passed) triples in a fixed order."""
        out = [
            ("consistency", self.consistency, self.passed["consistency"]),
            ("conservativeness", self.conservativeness, self.passed["conservativeness"]),
            ("stencil_radius", self.stencil_radius, self.passed["stencil"]),
            ("boundedness", self.boundedness, self.passed["boundedness"]),
            ("source_consistency", self.source_consistency, self.passed["source_consistency"]),
        ]
        for d in sorted(self.continuity, reverse=True):
            out.append((f"continuity_delta_{d:g}", self.continuity[d], True))
        return out


def _segment_distance(p, a, b):
    """Distance from points p (k, 2) to the segment a-b."""
    d = b - a
    L2 = float(d @ d)
    s = np.clip(((p - a) @ d) / L2, 0.0, 1.0) if L2 > 0 else np.zeros(len(p))
    q = a + s[:, None] * d
    return np.hypot(*(p - q).T)


def cell_face_distance(grid, cell, face):
    """Euclidean distance between a (convex) cell and a face segment."""
    V = grid.vertices[cell]
    a, b = grid.face_p0[face], grid.face_p1[face]
    best = _segment_distance(V, a, b).min()
    W = np.roll(V, -1, axis=0)
    for p in (a, b):
        for v, w in zip(V, W):
            best = min(best, _segment_distance(p[None, :], v, w)[0])
    return float(best)


def verify_flux_properties(flux_def, source_def, grid, model, states=None, tol=1e-10,
                           seed=0, n_random=4, stencil_limit=1.5, probe_cells=None):
    """Measure consistency, conservativeness, stencil, boundedness and continuity.

    Parameters
    ----------
    states : array (k, m), optional
        Constant states for the consistency and continuity probes; defaults
        to nine points on the diagonal of the admissible box.
    probe_cells : sequence of int, optional
        Cells perturbed for stencil probing; all cells by default.
    """
    rng = np.random.default_rng(seed)
    m = model.m
    states = model.sample_states(9) if states is None else np.asarray(states, float).reshape(-1, m)
    faces = np.arange(grid.nfaces)
    S = grid.face_measure
    h_max = grid_metrics(grid).h_max
    target = getattr(flux_def, "field", None) or conservation_field(model)

    # consistency and conservativeness on constant grid functions
    cons, conserv, src_cons = 0.0, 0.0, 0.0
    for w in states:
        gf = GridFunction.constant(grid, w)
        E = flux_def.evaluate(gf)
        W = np.tile(w, (grid.nfaces, 1))
        exact = face_integrals(grid, faces, W, target, model.homogeneous)
        cons = max(cons, float((np.abs(E - exact).max(axis=1) / S).max()))
        Fl, Fr = flux_def.outgoing(gf)
        both = (grid.face_left >= 0) & (grid.face_right >= 0)
        conserv = max(conserv, float(np.abs(Fl[both] + Fr[both]).max()) if both.any() else 0.0)
        if source_def is not None and model.source is not None:
            G = source_def.evaluate(gf)
            for c in range(0, grid.ncells, max(1, grid.ncells // 50)):
                ex = cell_source_integral(grid, c, w, model.source)
                src_cons = max(src_cons, float(np.abs(G[c] - ex).max() / grid.volume[c]))

    # stencil probing on a random admissible grid function
    lo, hi = np.asarray(model.lower), np.asarray(model.upper)
    base_vals = lo + rng.uniform(0.25, 0.75, size=(grid.ncells, m)) * (hi - lo)
    u0 = InitialData.constant(0.5 * (lo + hi))
    gf = GridFunction(grid, base_vals, u0)
    E0 = flux_def.evaluate(gf)
    radius = 0.0
    cells = range(grid.ncells) if probe_cells is None else probe_cells
    bump = 0.2 * (hi - lo)
    for c in cells:
        vals = base_vals.copy()
        vals[c] = np.where(vals[c] + bump <= hi, vals[c] + bump, vals[c] - bump)
        E1 = flux_def.evaluate(gf.with_values(vals))
        changed = np.nonzero(np.any(E1 != E0, axis=1))[0]
        for f in changed:
            radius = max(radius, cell_face_distance(grid, c, f) / h_max)

    # boundedness over random admissible grid functions
    bound = 0.0
    for _ in range(n_random):
        vals = lo + rng.uniform(0.0, 1.0, size=(grid.ncells, m)) * (hi - lo)
        E = flux_def.evaluate(gf.with_values(vals))
        bound = max(bound, float((np.abs(E).max(axis=1) / S).max()))

    # continuity modulus around constant states
    cont = {}
    for delta in (1e-1, 1e-2, 1e-3):
        worst = 0.0
        for w in states:
            g0 = GridFunction.constant(grid, w)
            E0c = flux_def.evaluate(g0)
            vals = np.clip(w + delta * (hi - lo) * rng.uniform(-1, 1, size=(grid.ncells, m)), lo, hi)
            E1 = flux_def.evaluate(g0.with_values(vals))
            worst = max(worst, float((np.abs(E1 - E0c).max(axis=1) / S).max()))
        cont[delta] = worst

    report = PropertyReport(cons, conserv, radius, bound, cont, src_cons, tol, stencil_limit)
    report.passed = {
        "consistency": cons <= tol,
        "conservativeness": conserv <= tol,
        "stencil": radius <= stencil_limit,
        "boundedness": bool(np.isfinite(bound)),
        "source_consistency": src_cons <= tol,
    }
    return report


__all__ = ["PropertyReport", "verify_flux_properties", "cell_face_distance"]
