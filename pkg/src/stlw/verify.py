"""Weak-form and entropy residuals, reference solutions and convergence studies.

Residuals test a piecewise-constant numerical solution against smooth
compactly supported bumps. Cell integrals of derivatives of a bump are
turned into face integrals by the divergence theorem, so they share the
face quadrature used by the numerical fluxes.
"""

from dataclasses import dataclass, field
import math
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .grid import INITIAL
from .models import kruzkov_pair
from .numerics import conservation_field, entropy_field
from .quadrature import DEFAULT_POINTS, DEFAULT_SEGMENTS, gauss_legendre
from .solver import march, march_staggered_streaming, solution_profile

L1_POINTS = 16


class SupportError(ValueError):
    """A test function reaches a region the residuals must not see."""


class ReferenceError(ValueError):
    """Invalid parameters for a reference solution."""


# ---------------------------------------------------------------------------
# test functions


@dataclass(frozen=True)
class TestFunction:
    """Bump amplitude * exp(-1/(1 - r^2)), r = |y - center| / radius, in (t, x)."""

    __test__ = False  # not a pytest class

    center: tuple
    radius: float
    amplitude: float = 1.0
    kind: str = "bump"

    def __post_init__(self):
        if self.kind != "bump":
            raise ValueError(f"unknown test function kind {self.kind!r}")
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    def _q(self, t, x):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        return ((t - self.center[0]) ** 2 + (x - self.center[1]) ** 2) / self.radius**2

    def __call__(self, t, x):
        q = self._q(t, x)
        inside = q < 1.0
        qs = np.where(inside, q, 0.0)
        return np.where(inside, self.amplitude * np.exp(-1.0 / (1.0 - qs)), 0.0)

    def grad(self, t, x):
        """Analytic gradient (d/dt, d/dx), shape (n, 2)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        x = np.atleast_1d(np.asarray(x, dtype=float))
        q = self._q(t, x)
        inside = q < 1.0
        qs = np.where(inside, q, 0.0)
        phi = self(t, x)
        k = np.where(inside, -2.0 * phi / (self.radius**2 * (1.0 - qs) ** 2), 0.0)
        return np.stack([k * (t - self.center[0]), k * (x - self.center[1])], axis=-1)

    @property
    def tmin(self):
        return self.center[0] - self.radius

    @property
    def tmax(self):
        return self.center[0] + self.radius


def default_battery(T, x_lo, x_hi, focus=None):
    """Five interior bumps on a short diagonal plus two straddling t = 0.

    Radii run from 0.15 to 0.4 of the slab size s = min(T, width); the
    interior centres sit near t = T/2 around x = ``focus``.
    """
    s = min(T, x_hi - x_lo)
    focus = 0.5 * (x_lo + x_hi) if focus is None else float(focus)
    radii = np.linspace(0.15, 0.4, 5) * s
    out = []
    for k, r in enumerate(radii):
        out.append(TestFunction((0.5 * T + (k - 2) * 0.02 * s, focus + (k - 2) * 0.1 * s), float(r)))
    for sgn in (-1, 1):
        out.append(TestFunction((0.0, focus + sgn * 0.15 * s), 0.2 * s))
    return out


# ---------------------------------------------------------------------------
# geometry helpers


def _lateral_band(grid):
    """x-range left free by the lateral copy-closure cells."""
    band = grid.cache.get("lateral_band")
    if band is None:
        lat = grid.lateral_cells()
        xmin = grid._per_cell(lambda V: V[..., 1].min(axis=1))
        xmax = grid._per_cell(lambda V: V[..., 1].max(axis=1))
        tol = 1e-12 * max(1.0, grid.x_hi - grid.x_lo)
        left = lat & (xmin <= grid.x_lo + tol)
        right = lat & (xmax >= grid.x_hi - tol)
        lo = float(xmax[left].max()) if left.any() else grid.x_lo
        hi = float(xmin[right].min()) if right.any() else grid.x_hi
        band = (lo, hi)
        grid.cache["lateral_band"] = band
    return band


def check_support(grid, phi):
    """Raise SupportError unless phi lives in the slab interior and t = 0 line."""
    lo, hi = _lateral_band(grid)
    t0, x0 = phi.center
    r = phi.radius
    if x0 - r <= lo:
        raise SupportError(f"support of bump at (t, x)=({t0:g}, {x0:g}), r={r:g} reaches "
                           f"the lateral cells left of x={lo:g}")
    if x0 + r >= hi:
        raise SupportError(f"support of bump at (t, x)=({t0:g}, {x0:g}), r={r:g} reaches "
                           f"the lateral cells right of x={hi:g}")
    if t0 + r >= grid.T:
        raise SupportError(f"support of bump at (t, x)=({t0:g}, {x0:g}), r={r:g} reaches "
                           f"the top of the slab t={grid.T:g}")


def _faces_near(grid, phi):
    """Faces whose segment comes within the support radius of phi's centre."""
    c = np.asarray(phi.center, dtype=float)
    a, b = grid.face_p0, grid.face_p1
    d = b - a
    L2 = (d**2).sum(axis=1)
    s = np.clip(((c - a) * d).sum(axis=1) / np.where(L2 > 0, L2, 1.0), 0.0, 1.0)
    q = a + s[:, None] * d
    dist = np.hypot(q[:, 0] - c[0], q[:, 1] - c[1])
    return np.nonzero(dist < phi.radius)[0]


def face_phi_integrals(grid, phi, faces, segments=DEFAULT_SEGMENTS, points=DEFAULT_POINTS):
    """Integral of phi over each listed face (composite Gauss, vectorized)."""
    faces = np.asarray(faces, dtype=int)
    xi, wi = gauss_legendre(points)
    s = ((np.arange(segments)[:, None] + xi[None, :]) / segments).ravel()
    w = np.tile(wi, segments) / segments
    p0, p1 = grid.face_p0[faces], grid.face_p1[faces]
    P = p0[:, None, :] + s[None, :, None] * (p1 - p0)[:, None, :]
    vals = phi(P[..., 0], P[..., 1])
    return grid.face_measure[faces] * (vals @ w)


def cell_gradient_integrals(grid, phi, segments=DEFAULT_SEGMENTS, points=DEFAULT_POINTS):
    """(cells, D) with D[k] = integral over cell k of grad phi, as sum of phi n over its faces.

    Only cells adjacent to a face meeting the support are returned,
    in ascending id order.
    """
    faces = _faces_near(grid, phi)
    I = face_phi_integrals(grid, phi, faces, segments, points)
    contrib = I[:, None] * grid.face_normal[faces]
    L, R = grid.face_left[faces], grid.face_right[faces]
    D = np.zeros((grid.ncells, 2))
    hit = np.zeros(grid.ncells, dtype=bool)
    okL, okR = L >= 0, R >= 0
    np.add.at(D, L[okL], contrib[okL])
    np.add.at(D, R[okR], -contrib[okR])
    hit[L[okL]] = True
    hit[R[okR]] = True
    cells = np.nonzero(hit)[0]
    return cells, D[cells]


def _fan_rule(V, points):
    """Points (k, q, 2) and weights (k, q) of a fan Gauss rule on k polygons of n vertices."""
    xi, wi = gauss_legendre(points)
    u, v = np.meshgrid(xi, xi, indexing="ij")
    wu, wv = np.meshgrid(wi, wi, indexing="ij")
    s, t = u.ravel(), (v * (1.0 - u)).ravel()
    wq = (wu * wv).ravel() * (1.0 - u).ravel()
    c = V.mean(axis=1, keepdims=True)
    A, B = V, np.roll(V, -1, axis=1)
    ab, ac = A - c, B - c
    area2 = np.abs(ab[..., 0] * ac[..., 1] - ab[..., 1] * ac[..., 0])  # (k, n)
    pts = (c[:, :, None, :] + s[None, None, :, None] * ab[:, :, None, :]
           + t[None, None, :, None] * ac[:, :, None, :])
    w = area2[:, :, None] * wq[None, None, :]
    k = V.shape[0]
    return pts.reshape(k, -1, 2), w.reshape(k, -1)


def cell_phi_integrals(grid, phi, cells, points=DEFAULT_POINTS):
    """Integral of phi over each listed cell (fan Gauss rule)."""
    cells = np.asarray(cells, dtype=int)
    out = np.zeros(len(cells))
    by_size = {}
    for k, c in enumerate(cells):
        by_size.setdefault(len(grid.vertices[c]), []).append(k)
    for ks in by_size.values():
        V = np.stack([grid.vertices[cells[k]] for k in ks])
        P, W = _fan_rule(V, points)
        out[ks] = (phi(P[..., 0], P[..., 1]) * W).sum(axis=1)
    return out


def cell_gradient_quadrature(grid, phi, cells, points=DEFAULT_POINTS):
    """Integral of the analytic gradient of phi over each listed cell."""
    cells = np.asarray(cells, dtype=int)
    out = np.zeros((len(cells), 2))
    by_size = {}
    for k, c in enumerate(cells):
        by_size.setdefault(len(grid.vertices[c]), []).append(k)
    for ks in by_size.values():
        V = np.stack([grid.vertices[cells[k]] for k in ks])
        P, W = _fan_rule(V, points)
        G = phi.grad(P[..., 0].ravel(), P[..., 1].ravel()).reshape(P.shape)
        out[ks] = (G * W[..., None]).sum(axis=1)
    return out


# ---------------------------------------------------------------------------
# residuals


def _initial_term(grid, u0, phi, density, segments, points):
    """Integral over t = 0 of phi(0, x) * density(u0(x)).

    Uses the composite rule of the initial faces, each further split at
    u0 breakpoints, so for smooth u0 the nodes coincide with those of the
    initial-face integrals and constant states cancel to rounding.
    """
    t0, _ = phi.center
    if abs(t0) >= phi.radius:
        return None
    faces = _faces_near(grid, phi)
    faces = faces[grid.face_kind[faces] == INITIAL]
    if not len(faces):
        return None
    xa = np.minimum(grid.face_p0[faces, 1], grid.face_p1[faces, 1])
    xb = np.maximum(grid.face_p0[faces, 1], grid.face_p1[faces, 1])
    br = np.asarray(u0.breaks, dtype=float)
    los, his = [], []
    for a, b in zip(xa, xb):
        e = np.concatenate([[a], br[(br > a) & (br < b)], [b]])
        los.append(e[:-1])
        his.append(e[1:])
    lo, hi = np.concatenate(los), np.concatenate(his)
    xi, wi = gauss_legendre(points)
    s = ((np.arange(segments)[:, None] + xi[None, :]) / segments).ravel()
    w = np.tile(wi, segments) / segments
    x = (lo[:, None] + s[None, :] * (hi - lo)[:, None]).ravel()
    w = (w[None, :] * (hi - lo)[:, None]).ravel()
    vals = density(u0(x), np.zeros_like(x), x)
    vals = np.asarray(vals, dtype=float).reshape(len(x), -1)
    return (w * phi(np.zeros_like(x), x))[:, None] * vals


def _form_residual(solution, fld, source, u0, phi, segments, points):
    grid = solution.grid
    check_support(grid, phi)
    cells, D = cell_gradient_integrals(grid, phi, segments, points)
    U = solution.values[cells]
    ct = grid.centroid[cells]
    a, b = fld(U, ct[:, 0], ct[:, 1])
    a = np.asarray(a, dtype=float).reshape(len(cells), -1)
    b = np.asarray(b, dtype=float).reshape(len(cells), -1)
    terms = [-(a * D[:, :1] + b * D[:, 1:])]
    init = _initial_term(grid, u0, phi, lambda u, t, x: fld(u, t, x)[0], segments, points)
    if init is not None:
        terms.append(-init)
    if source is not None:
        V = cell_phi_integrals(grid, phi, cells, 2 * points)
        g = np.asarray(source(U, ct[:, 0], ct[:, 1]), dtype=float).reshape(len(cells), -1)
        terms.append(-g * V[:, None])
    stacked = np.concatenate(terms, axis=0)
    R = np.array([math.fsum(stacked[:, i]) for i in range(stacked.shape[1])])
    return float(R[0]) if len(R) == 1 else float(R[np.argmax(np.abs(R))])


def weak_residual(solution, model, u0, phi, segments=DEFAULT_SEGMENTS, points=DEFAULT_POINTS):
    """Residual of the weak form of the conservation law for one test function.

    R = -sum_C [u_C int_C phi_t + f(u_C) int_C phi_x] - int phi(0, x) u0 dx
    - sum_C p(u_C) int_C phi, with f and p sampled at cell centroids. For a
    system the component of largest magnitude is returned.
    """
    return _form_residual(solution, conservation_field(model), model.source, u0, phi,
                          segments, points)


def entropy_residual(solution, model, pair, u0, phi, segments=DEFAULT_SEGMENTS,
                     points=DEFAULT_POINTS):
    """LHS minus RHS of the weak entropy inequality; <= 0 (up to O(h)) for entropy solutions."""
    if np.any(phi(np.array([phi.center[0]]), np.array([phi.center[1]])) < 0):
        raise SupportError("entropy residual needs a nonnegative test function")
    g = None
    if model.source is not None:
        g = lambda u, t, x: pair.g(u, t, x)
    return _form_residual(solution, entropy_field(pair), g, u0, phi, segments, points)


def divergence_identity(grid, phi, segments=DEFAULT_SEGMENTS, points=DEFAULT_POINTS):
    """max_i |sum_C int_{dC} phi n_i dS|; zero when phi vanishes on the slab boundary."""
    _, D = cell_gradient_integrals(grid, phi, segments, points)
    return float(max(abs(math.fsum(D[:, 0])), abs(math.fsum(D[:, 1]))))


def cell_closure_defect(grid):
    """max over cells of |sum_F sign S(F) n_F| / perimeter; zero iff face tables close every cell."""
    v = grid.face_measure[:, None] * grid.face_normal
    D = np.zeros((grid.ncells, 2))
    L, R = grid.face_left, grid.face_right
    np.add.at(D, L[L >= 0], v[L >= 0])
    np.add.at(D, R[R >= 0], -v[R >= 0])
    return float((np.hypot(D[:, 0], D[:, 1]) / grid.perimeters()).max())


def cell_divergence_defect(grid, phi, segments=DEFAULT_SEGMENTS, points=DEFAULT_POINTS):
    """Largest per-cell gap between the face form and area quadrature of int grad phi.

    Normalized by the largest cell value; limited by quadrature error only.
    """
    cells, D = cell_gradient_integrals(grid, phi, segments, points)
    A = cell_gradient_quadrature(grid, phi, cells, 2 * points)
    scale = max(float(np.abs(A).max()), 1e-300)
    return float(np.abs(D - A).max() / scale)


@dataclass
class ResidualReport:
    """Residuals over a battery; keys are battery indices and (a, index) pairs."""

    weak: dict
    entropy: dict
    refinement_defect: float

    @property
    def max_weak(self):
        return max((abs(v) for v in self.weak.values()), default=0.0)

    @property
    def max_entropy(self):
        return max(self.entropy.values(), default=-np.inf)

    def worst_weak(self):
        return max(self.weak, key=lambda k: (abs(self.weak[k]), -k)) if self.weak else None

    def worst_entropy(self):
        return max(self.entropy, key=lambda k: (self.entropy[k], -k[1])) if self.entropy else None


def residual_report(solution, model, u0, battery, entropy_a=(), quad_refine=False,
                    segments=DEFAULT_SEGMENTS, points=DEFAULT_POINTS):
    """Weak residuals for every bump and entropy residuals for every (a, bump).

    With ``quad_refine`` each value is recomputed with doubled segment counts
    and the largest change, relative to 1 + |value|, is reported.
    """
    weak, ent = {}, {}
    defect = 0.0
    pairs = [(float(a), kruzkov_pair(model, a)) for a in entropy_a]
    for k, phi in enumerate(battery):
        weak[k] = weak_residual(solution, model, u0, phi, segments, points)
        if quad_refine:
            v2 = weak_residual(solution, model, u0, phi, 2 * segments, points)
            defect = max(defect, abs(v2 - weak[k]) / (1.0 + abs(weak[k])))
        for a, pair in pairs:
            ent[(a, k)] = entropy_residual(solution, model, pair, u0, phi, segments, points)
            if quad_refine:
                v2 = entropy_residual(solution, model, pair, u0, phi, 2 * segments, points)
                defect = max(defect, abs(v2 - ent[(a, k)]) / (1.0 + abs(ent[(a, k)])))
    return ResidualReport(weak, ent, defect)


# ---------------------------------------------------------------------------
# references


@dataclass(frozen=True)
class Snapshot:
    """A reference profile x -> u at one time, with its nonsmooth points."""

    fn: Callable
    breaks: tuple = ()

    def __call__(self, x):
        return np.asarray(self.fn(np.atleast_1d(np.asarray(x, dtype=float))), dtype=float)


@dataclass(frozen=True)
class Reference:
    """Exact scalar solution u(t, x) with breakpoints as a function of t."""

    name: str
    fn: Callable
    breaks_fn: Callable

    def __call__(self, t, x):
        return self.fn(float(t), np.atleast_1d(np.asarray(x, dtype=float)))

    def breaks(self, t):
        return tuple(self.breaks_fn(float(t)))

    def at(self, t):
        t = float(t)
        return Snapshot(lambda x: self.fn(t, x), self.breaks(t))


def exact_reference(problem, **params):
    """Exact solution by name.

    ``burgers_shock`` and ``burgers_rarefaction`` take uL, uR and x0;
    ``advection`` takes c and u0 (InitialData); ``trivial_indicator`` takes
    a and b.
    """
    if problem == "burgers_shock":
        uL, uR, x0 = float(params["uL"]), float(params["uR"]), float(params.get("x0", 0.0))
        if not uL > uR:
            raise ReferenceError(f"a Burgers shock needs uL > uR, got {uL} <= {uR}")
        s = 0.5 * (uL + uR)
        return Reference(f"burgers_shock({uL:g},{uR:g})",
                         lambda t, x: np.where(x < x0 + s * t, uL, uR),
                         lambda t: (x0 + s * t,))
    if problem == "burgers_rarefaction":
        uL, uR, x0 = float(params["uL"]), float(params["uR"]), float(params.get("x0", 0.0))
        if not uL < uR:
            raise ReferenceError(f"a Burgers rarefaction needs uL < uR, got {uL} >= {uR}")

        def fan(t, x):
            if t <= 0:
                return np.where(x < x0, uL, uR)
            return np.clip((x - x0) / t, uL, uR)
        return Reference(f"burgers_rarefaction({uL:g},{uR:g})", fan,
                         lambda t: (x0 + uL * t, x0 + uR * t))
    if problem == "advection":
        c = float(params.get("c", 1.0))
        u0 = params["u0"]
        return Reference(f"advection(c={c:g})", lambda t, x: u0(x - c * t)[:, 0],
                         lambda t: tuple(b + c * t for b in u0.breaks))
    if problem == "trivial_indicator":
        a, b = float(params.get("a", 0.0)), float(params.get("b", 1.0))
        if not a < b:
            raise ReferenceError("indicator needs a < b")
        return Reference(f"trivial_indicator({a:g},{b:g})",
                         lambda t, x: ((x >= a) & (x < b)).astype(float),
                         lambda t: (a, b))
    raise ReferenceError(f"unknown reference problem {problem!r}")


def smoothed_reference(t, h, u0):
    """u0 convolved with a Gaussian of variance t/(4h) (first component).

    This is the large-time limit of the staggered averaging recursion with
    time step h^3: two steps spread by variance h^2/2 over time 2h^3.
    """
    if not (t > 0 and h > 0):
        raise ReferenceError("t and h must be positive")
    if any(np.asarray(c).shape[0] != 1 for c in u0.coeffs):
        raise ReferenceError("smoothed_reference needs piecewise-constant initial data")
    sigma = math.sqrt(t / (4.0 * h))
    b = np.asarray(u0.breaks, dtype=float)
    vals = [u0.left[0]] + [float(np.asarray(c)[0, 0]) for c in u0.coeffs] + [u0.right[0]]
    if len(b) == 0:
        return Snapshot(lambda x: np.full(len(x), vals[0]))
    if not u0.coeffs:
        vals = [u0.left[0], u0.right[0]]

    def fn(x):
        # sum_k v_k P(b_{k-1} < x + sigma Z < b_k)
        cdf = ndtr((b[None, :] - x[:, None]) / sigma)
        edges = np.concatenate([np.zeros((len(x), 1)), cdf, np.ones((len(x), 1))], axis=1)
        return np.diff(edges, axis=1) @ np.asarray(vals)
    return Snapshot(fn, ())


def l1_distance(profile, reference, window, breaks=None):
    """Integral over the window of |u_h(x) - reference(x)|.

    Each piece (cell slice cut at reference breakpoints and at sampled
    crossings of the reference with the cell value) gets a 16-point Gauss
    rule. ``profile`` is a solver Profile (lo, hi, u); only its first
    component is compared.
    """
    a, b = float(window[0]), float(window[1])
    if breaks is None:
        breaks = getattr(reference, "breaks", ())
    lo, hi = np.asarray(profile.lo), np.asarray(profile.hi)
    u = np.asarray(profile.u).reshape(len(lo), -1)[:, 0]
    pts = np.concatenate([lo, hi[-1:], [a, b], [c for c in breaks if a < c < b]])
    pts = np.unique(np.clip(pts, a, b))
    if len(pts) < 2:
        return 0.0
    pa, pb = pts[:-1], pts[1:]
    mid = 0.5 * (pa + pb)
    owner = np.searchsorted(hi, mid)
    inside = (owner < len(lo)) & (pb > pa)
    owner = np.minimum(owner, len(lo) - 1)
    covered = inside & (lo[owner] <= mid)
    if not np.all(covered):
        raise ValueError("profile does not cover the window")
    pa, pb, owner = _split_at_crossings(pa, pb, u[owner], owner, reference)
    xi, wi = gauss_legendre(L1_POINTS)
    x = (pa[:, None] + xi[None, :] * (pb - pa)[:, None])
    w = wi[None, :] * (pb - pa)[:, None]
    ref = reference(x.ravel()).reshape(x.shape)
    return float((w * np.abs(u[owner][:, None] - ref)).sum())


def _split_at_crossings(pa, pb, level, owner, reference):
    """Cut pieces where reference - level changes sign, so |.| has no interior kink."""
    xi, _ = gauss_legendre(L1_POINTS)
    s = np.concatenate([[0.0], xi, [1.0]])
    x = pa[:, None] + s[None, :] * (pb - pa)[:, None]
    d = reference(x.ravel()).reshape(x.shape) - level[:, None]
    flip = np.nonzero(np.any(d[:, :-1] * d[:, 1:] < 0, axis=1))[0]
    if not len(flip):
        return pa, pb, owner
    extra_a, extra_b, extra_o = [], [], []
    keep = np.ones(len(pa), dtype=bool)
    for k in flip:
        g = lambda y: float(reference(np.array([y]))[0]) - level[k]
        cuts = [brentq(g, x[k, j], x[k, j + 1], xtol=1e-15)
                for j in range(len(s) - 1) if d[k, j] * d[k, j + 1] < 0]
        e = np.concatenate([[pa[k]], cuts, [pb[k]]])
        extra_a.append(e[:-1])
        extra_b.append(e[1:])
        extra_o.append(np.full(len(e) - 1, owner[k]))
        keep[k] = False
    return (np.concatenate([pa[keep]] + extra_a), np.concatenate([pb[keep]] + extra_b),
            np.concatenate([owner[keep]] + extra_o))


# ---------------------------------------------------------------------------
# experiments


@dataclass
class Experiment:
    """One problem family marched at several resolutions.

    ``build_grid(h)`` returns a grid and ``build_scheme(model, grid)`` a
    scheme. ``reference(t, h)`` returns a Snapshot (or None). With
    ``streaming(h)`` set, the staggered averaging march runs without a
    grid and only L1 data and masses are reported.
    """

    name: str
    model: object
    u0: object
    t_report: float
    window: tuple
    build_grid: Optional[Callable] = None
    build_scheme: Optional[Callable] = None
    reference: Optional[Callable] = None
    battery: list = field(default_factory=list)
    entropy_a: tuple = ()
    streaming: Optional[Callable] = None
    quad_refine: bool = False


@dataclass
class RunResult:
    h: float
    l1_error: float
    residuals: Optional[ResidualReport]
    mass_drift: float
    max_balance_residual: float
    cfl_violations: int
    profile: object
    march: object = None


@dataclass
class ConvergenceRow:
    h: float
    l1_error: float
    weak_residual: float
    weak_phi: Optional[int]
    entropy_residual: float
    entropy_a: Optional[float]
    mass_drift: float
    rate: float
    run: RunResult = None


class ConvergenceError(RuntimeError):
    """A run of a convergence study failed; names the offending h."""


def lateral_outflow(grid, flux_def, gf):
    """Per-layer net outgoing flux through lateral outer faces."""
    outer = np.nonzero((grid.face_right < 0) & (grid.face_left >= 0) & ~grid.is_horizontal())[0]
    Fl, _ = flux_def.outgoing(gf, outer)
    out = np.zeros((len(grid.layers), gf.m))
    np.add.at(out, grid.cell_layer[grid.face_left[outer]], Fl)
    return out


def mass_drift(result, scheme):
    """max over layers of |M_L - M_0 + boundary outflow - source| below layer L."""
    gf = result.solution
    grid = gf.grid
    flow = lateral_outflow(grid, scheme.flux_def, gf)
    G = scheme.source_def.evaluate(gf)
    src = np.zeros_like(flow)
    np.add.at(src, grid.cell_layer, G)
    net = np.cumsum(flow - src, axis=0)
    M = result.per_layer_mass
    drift = M[1:] - M[0] + net[:-1]
    return float(np.abs(drift).max()) if len(drift) else 0.0


def run_once(exp, h):
    """March one resolution and evaluate every configured diagnostic."""
    t = exp.t_report
    if exp.streaming is not None:
        res = exp.streaming(h)
        prof = res.profile
        M = res.per_layer_mass
        drift = float(np.abs(M - M[0]).max())
        rep, bal, cfl, mres = None, 0.0, 0, res
    else:
        grid = exp.build_grid(h)
        scheme = exp.build_scheme(exp.model, grid)
        mres = march(grid, scheme, exp.model, exp.u0)
        prof = solution_profile(mres.solution, t)
        drift = mass_drift(mres, scheme)
        rep = None
        if exp.battery:
            rep = residual_report(mres.solution, exp.model, exp.u0, exp.battery, exp.entropy_a,
                                  exp.quad_refine)
        bal, cfl = mres.max_balance_residual, mres.cfl_violations
    l1 = float("nan")
    if exp.reference is not None:
        l1 = l1_distance(prof, exp.reference(t, h), exp.window)
    return RunResult(h, l1, rep, drift, bal, cfl, prof, mres)


def convergence_study(exp, hs):
    """Rows (h, L1 error, weak/entropy residual maxima, mass drift, observed rate)."""
    hs = [float(h) for h in hs]
    if len(hs) < 3:
        raise ValueError("a convergence study needs at least three h values")
    for a, b in zip(hs, hs[1:]):
        if not math.isclose(b, 0.5 * a, rel_tol=1e-9):
            raise ValueError(f"h values must halve: {a} -> {b}")
    rows = []
    for h in hs:
        try:
            run = run_once(exp, h)
        except Exception as e:
            raise ConvergenceError(f"experiment {exp.name!r} failed at h={h:g}: {e}") from e
        rep = run.residuals
        wk = rep.worst_weak() if rep else None
        ek = rep.worst_entropy() if rep else None
        rows.append(ConvergenceRow(
            h=h, l1_error=run.l1_error,
            weak_residual=abs(rep.weak[wk]) if wk is not None else float("nan"),
            weak_phi=wk,
            entropy_residual=rep.entropy[ek] if ek is not None else float("nan"),
            entropy_a=ek[0] if ek is not None else None,
            mass_drift=run.mass_drift, rate=float("nan"), run=run))
    for prev, row in zip(rows, rows[1:]):
        if prev.l1_error > 0 and row.l1_error > 0:
            row.rate = math.log2(prev.l1_error / row.l1_error)
    return rows


def streaming_counterexample(dt_rule, T, x_lo, x_hi, u0):
    """Streaming staggered march factory: h -> StreamResult with dt = dt_rule(h)."""
    return lambda h: march_staggered_streaming(h, dt_rule(h), T, x_lo, x_hi, u0)


__all__ = [
    "SupportError", "ReferenceError", "TestFunction", "default_battery", "check_support",
    "face_phi_integrals", "cell_gradient_integrals", "cell_phi_integrals",
    "cell_gradient_quadrature", "weak_residual", "entropy_residual", "divergence_identity",
    "cell_closure_defect", "cell_divergence_defect", "ResidualReport", "residual_report",
    "Snapshot", "Reference", "exact_reference", "smoothed_reference", "l1_distance",
    "Experiment", "RunResult", "ConvergenceRow", "ConvergenceError", "lateral_outflow",
    "mass_drift", "run_once", "convergence_study", "streaming_counterexample",
]
