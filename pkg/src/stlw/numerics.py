"""Numerical fluxes, numerical sources and the built-in marching schemes.

Every flux definition returns one value per face, oriented from the face's
left cell to its right cell (for initial faces: from the boundary into the
cell). The outgoing flux of a cell through a face is that value times the
cell's face sign. Schemes pair such a definition with an explicit update
rule; the flux form is what the solver audits.
"""

from dataclasses import dataclass

import numpy as np

from .grid import INITIAL, INTERIOR, OUTER, REMAP
from .initial import InitialData
from .models import EntropyPair, PhysicalModel, kruzkov_pair
from .quadrature import (DEFAULT_POINTS, DEFAULT_SEGMENTS, gauss_legendre,
                         integrate_interval, polygon_rule, segment_rule)
from . import remap as rm

# face classes used by layered flux definitions
F_INIT, F_OUTER, F_TIME, F_SIDE, F_REMAP = range(5)


class SchemeError(ValueError):
    """Scheme/grid/model combination that cannot be marched."""


@dataclass
class GridFunction:
    """Piecewise-constant values on the cells of a grid, plus the initial data."""

    grid: object
    values: np.ndarray
    initial: InitialData

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != self.grid.ncells:
            raise ValueError(f"need {self.grid.ncells} cell values, got {v.shape[0]}")
        self.values = v

    @property
    def m(self):
        return self.values.shape[1]

    @classmethod
    def constant(cls, grid, w):
        w = np.atleast_1d(np.asarray(w, dtype=float))
        return cls(grid, np.tile(w, (grid.ncells, 1)), InitialData.constant(w))

    def with_values(self, values):
        return GridFunction(self.grid, values, self.initial)

    def __getitem__(self, cell):
        return self.values[cell]


# ---------------------------------------------------------------------------
# exact face integrals


def conservation_field(model):
    """(u, t, x) -> (time component, space component) of (u, f(u, y))."""
    def field(u, t, x):
        return u, model.flux(u, t, x)
    return field


def entropy_field(pair):
    def field(u, t, x):
        return pair.eta0(u, t, x)[:, None], pair.eta1(u, t, x)[:, None]
    return field


def _as_field(field):
    if isinstance(field, PhysicalModel):
        return conservation_field(field)
    if isinstance(field, EntropyPair):
        return entropy_field(field)
    return field


def exact_face_integral(w, face, field, segments=DEFAULT_SEGMENTS, points=DEFAULT_POINTS):
    """Integral of (w n_t + f(w, y) n_x) over one face, by composite Gauss rule.

    ``field`` is a PhysicalModel, an EntropyPair, or a callable
    ``(u, t, x) -> (time part, space part)``.
    """
    field = _as_field(field)
    w = np.atleast_1d(np.asarray(w, dtype=float))
    p0, p1 = face.endpoints
    pts, wts = segment_rule(p0, p1, segments, points)
    W = np.tile(w, (len(pts), 1))
    a, b = field(W, pts[:, 0], pts[:, 1])
    n = face.normal
    return (wts[:, None] * (a * n[0] + b * n[1])).sum(axis=0)


def face_integrals(grid, faces, W, field, homogeneous=False,
                   segments=DEFAULT_SEGMENTS, points=DEFAULT_POINTS):
    """Vectorized exact face integrals of constant states W[k] over faces[k].

    Position-independent fields are integrated in closed form (the Gauss
    rule is exact for them); otherwise the composite rule is applied.
    """
    field = _as_field(field)
    faces = np.asarray(faces, dtype=int)
    W = np.asarray(W, dtype=float)
    n = grid.face_normal[faces]
    S = grid.face_measure[faces]
    p0, p1 = grid.face_p0[faces], grid.face_p1[faces]
    if len(faces) == 0:
        a, _ = field(W, np.zeros(0), np.zeros(0))
        return np.zeros((0, a.shape[1] if a.ndim > 1 else 1))
    if homogeneous:
        mid = 0.5 * (p0 + p1)
        a, b = field(W, mid[:, 0], mid[:, 1])
        return S[:, None] * (a * n[:, :1] + b * n[:, 1:])
    xi, wi = gauss_legendre(points)
    s = ((np.arange(segments)[:, None] + xi[None, :]) / segments).ravel()
    w = np.tile(wi, segments) / segments
    P = p0[:, None, :] + s[None, :, None] * (p1 - p0)[:, None, :]
    q = len(s)
    Wr = np.repeat(W, q, axis=0)
    a, b = field(Wr, P[..., 0].ravel(), P[..., 1].ravel())
    nt = np.repeat(n[:, 0], q)[:, None]
    nx = np.repeat(n[:, 1], q)[:, None]
    dens = (a * nt + b * nx).reshape(len(faces), q, -1)
    return S[:, None] * np.einsum("q,kqm->km", w, dens)


def face_classes(grid):
    """Per-face class: initial, outer, time (closure), side or remap."""
    cls = np.full(grid.nfaces, F_SIDE)
    cls[grid.face_kind == INITIAL] = F_INIT
    cls[grid.face_kind == OUTER] = F_OUTER
    cls[grid.face_kind == REMAP] = F_REMAP
    cls[(grid.face_kind == INTERIOR) & grid.is_horizontal()] = F_TIME
    return cls


# ---------------------------------------------------------------------------
# flux and source definitions


class NumericalFluxDef:
    """Per-face numerical flux E_F, vectorized over faces.

    Subclasses implement ``evaluate`` and ``stencil``. ``outgoing`` gives the
    flux as seen from each side, (E_{L->R}, E_{R->L}); it equals (F, -F)
    for every conservative definition.
    """

    name = "flux"

    def __init__(self, grid, m):
        self.grid = grid
        self.m = m

    def evaluate(self, gf, faces=None):
        raise NotImplementedError

    def outgoing(self, gf, faces=None):
        F = self.evaluate(gf, faces)
        return F, -F

    def stencil(self, face):
        raise NotImplementedError

    def __call__(self, face, gf):
        return self.evaluate(gf, np.array([face]))[0]

    def _faces(self, faces):
        return np.arange(self.grid.nfaces) if faces is None else np.asarray(faces, dtype=int)


class NumericalSourceDef:
    """Per-cell numerical source G_C; zero by default."""

    name = "zero"

    def __init__(self, grid, m):
        self.grid = grid
        self.m = m

    def evaluate(self, gf, cells=None):
        cells = np.arange(self.grid.ncells) if cells is None else np.asarray(cells, dtype=int)
        return np.zeros((len(cells), self.m))

    def stencil(self, cell):
        return {int(cell)}

    def __call__(self, cell, gf):
        return self.evaluate(gf, np.array([cell]))[0]


class SelfsimilarSource(NumericalSourceDef):
    """G_C = -d u_C V(C)."""

    name = "selfsimilar"

    def __init__(self, grid, m, d):
        super().__init__(grid, m)
        self.d = d

    def evaluate(self, gf, cells=None):
        cells = np.arange(self.grid.ncells) if cells is None else np.asarray(cells, dtype=int)
        return -self.d * gf.values[cells] * self.grid.volume[cells][:, None]


class MidpointSource(NumericalSourceDef):
    """G_C = s(u_C, centroid) V(C) for a source density s(u, t, x) -> (n, k)."""

    name = "midpoint"

    def __init__(self, grid, m, density):
        super().__init__(grid, m)
        self.density = density

    def evaluate(self, gf, cells=None):
        cells = np.arange(self.grid.ncells) if cells is None else np.asarray(cells, dtype=int)
        c = self.grid.centroid[cells]
        val = self.density(gf.values[cells], c[:, 0], c[:, 1])
        if val.ndim == 1:
            val = val[:, None]
        return val * self.grid.volume[cells][:, None]


def selfsimilar_source(model, d=1, grid=None):
    """Numerical source for the similarity-coordinate form, -d u_C V(C)."""
    if int(d) != d or d < 1:
        raise SchemeError(f"dimension d must be a positive integer, got {d}")
    return SelfsimilarSource(grid, model.m, int(d))


def default_source(model, grid):
    if model.source is None:
        return NumericalSourceDef(grid, model.m)
    if model.name.startswith("selfsimilar"):
        d = int(model.name.rsplit("d=", 1)[1].rstrip(")"))
        return SelfsimilarSource(grid, model.m, d)
    return MidpointSource(grid, model.m, model.source)


class LayeredFlux(NumericalFluxDef):
    """Shared face handling for layered schemes.

    Initial faces carry the integral of u0; outer faces the exact integral
    of the adjacent cell's own state (copy closure); horizontal interior
    faces S(F) times the value of the cell named by ``time_side``; the
    remaining interior faces defer to ``side_flux``.
    """

    time_side = "right"

    def __init__(self, grid, model, segments=DEFAULT_SEGMENTS, points=DEFAULT_POINTS):
        super().__init__(grid, model.m)
        self.model = model
        self.cls = face_classes(grid)
        self.segments = segments
        self.points = points
        self.field = conservation_field(model)

    def exact(self, faces, W):
        return face_integrals(self.grid, faces, W, self.field, self.model.homogeneous,
                              self.segments, self.points)

    def initial_integrals(self, initial, faces):
        out = np.empty((len(faces), self.m))
        for k, f in enumerate(faces):
            xa, xb = sorted((self.grid.face_p0[f, 1], self.grid.face_p1[f, 1]))
            out[k] = initial.integrate(xa, xb)
        return out

    def side_flux(self, uL, uR, faces):
        raise NotImplementedError

    def remap_flux(self, gf, faces):
        raise SchemeError(f"{self.name} flux has no remap faces")

    def time_cells(self, faces):
        g = self.grid
        return g.face_right[faces] if self.time_side == "right" else g.face_left[faces]

    def evaluate(self, gf, faces=None):
        g = self.grid
        faces = self._faces(faces)
        u = gf.values
        cls = self.cls[faces]
        L, R = g.face_left[faces], g.face_right[faces]
        out = np.zeros((len(faces), self.m))
        sel = cls == F_INIT
        if np.any(sel):
            out[sel] = self.initial_integrals(gf.initial, faces[sel])
        sel = cls == F_OUTER
        if np.any(sel):
            out[sel] = self.exact(faces[sel], u[L[sel]])
        sel = cls == F_TIME
        if np.any(sel):
            out[sel] = g.face_measure[faces[sel]][:, None] * u[self.time_cells(faces[sel])]
        sel = cls == F_SIDE
        if np.any(sel):
            out[sel] = self.side_flux(u[L[sel]], u[R[sel]], faces[sel])
        sel = cls == F_REMAP
        if np.any(sel):
            out[sel] = self.remap_flux(gf, faces[sel])
        return out

    def stencil(self, face):
        g = self.grid
        c = self.cls[face]
        if c == F_INIT:
            return set()
        if c == F_OUTER:
            return {int(g.face_left[face])}
        if c == F_TIME:
            return {int(self.time_cells(np.array([face]))[0])}
        return {int(g.face_left[face]), int(g.face_right[face])}


class LaxFriedrichsFlux(LayeredFlux):
    """h (lam (f(u_L) + f(u_R))/2 - (u_R - u_L)/2) on side faces."""

    name = "lax_friedrichs"

    def __init__(self, grid, model, h, lam):
        super().__init__(grid, model)
        self.h = h
        self.lam = lam

    def side_flux(self, uL, uR, faces):
        mid = self.grid.face_midpoint(faces)
        fL = self.model.flux(uL, mid[:, 0], mid[:, 1])
        fR = self.model.flux(uR, mid[:, 0], mid[:, 1])
        return self.h * (self.lam * 0.5 * (fL + fR) - 0.5 * (uR - uL))


class StaggeredFlux(LayeredFlux):
    """(S/2-wide) time faces carry S u of the cell below; side faces carry 0."""

    name = "staggered_lax_friedrichs"
    time_side = "left"

    def side_flux(self, uL, uR, faces):
        return np.zeros_like(uL)


class SpaceTimeFlux(LayeredFlux):
    """Mean of exact face integrals plus alpha S (u_L - u_R)/2 on side faces.

    Remap faces carry the integral of the old cell's reconstruction over
    the face.
    """

    name = "spacetime_lax_friedrichs"

    def __init__(self, grid, model, alpha, scheme=None):
        super().__init__(grid, model)
        self.alpha = alpha
        self.scheme = scheme

    def side_flux(self, uL, uR, faces):
        IL = self.exact(faces, uL)
        IR = self.exact(faces, uR)
        S = self.grid.face_measure[faces][:, None]
        return 0.5 * (IL + IR) + self.alpha * S * 0.5 * (uL - uR)

    def remap_flux(self, gf, faces):
        st = self.scheme.remap_state(gf)
        g = self.grid
        pos = st.position[g.face_left[faces]]
        xa = np.minimum(g.face_p0[faces, 1], g.face_p1[faces, 1])
        xb = np.maximum(g.face_p0[faces, 1], g.face_p1[faces, 1])
        return rm.piece_integrals(st.lo, st.hi, st.u, st.slopes, pos, xa, xb)

    def stencil(self, face):
        if self.cls[face] != F_REMAP:
            return super().stencil(face)
        # the old cell's closure value and its neighbours' (for the slope)
        g = self.grid
        O = int(g.face_left[face])
        plan = self.scheme.remap_plan
        k = int(np.nonzero(plan.B == O)[0][0])
        near = plan.B[max(k - 1, 0):k + 2]
        out = set()
        for c in near:
            for f in g.cell_faces[c]:
                if self.cls[f] == F_REMAP:
                    continue
                out |= super().stencil(f)
            out.add(int(c))
        return out


class KruzkovFlux(NumericalFluxDef):
    """Entropy flux of a layered scheme for the Kruzkov pair with parameter a.

    Side faces: F(u v a) - F(u ^ a) with the scheme's side flux F; time
    faces: S eta0 of the same cell the conservation flux uses; initial
    faces: the integral of eta0(u0); outer faces: exact entropy integrals.
    """

    def __init__(self, base, pair, a):
        super().__init__(base.grid, 1)
        self.base = base
        self.pair = pair
        self.a = float(a)
        self.name = f"kruzkov({base.name}, a={self.a:g})"
        self.field = entropy_field(pair)

    def evaluate(self, gf, faces=None):
        b = self.base
        g = self.grid
        faces = self._faces(faces)
        u = gf.values
        cls = b.cls[faces]
        L, R = g.face_left[faces], g.face_right[faces]
        out = np.zeros((len(faces), 1))
        sel = cls == F_INIT
        for k in np.nonzero(sel)[0]:
            f = faces[k]
            xa, xb = sorted((g.face_p0[f, 1], g.face_p1[f, 1]))
            out[k, 0] = integrate_interval(
                lambda x: self.pair.eta0(gf.initial(x), 0.0 * x, x),
                xa, xb, breaks=gf.initial.breaks)
        sel = cls == F_OUTER
        if np.any(sel):
            out[sel] = face_integrals(g, faces[sel], u[L[sel]], self.field,
                                      b.model.homogeneous, b.segments, b.points)
        sel = cls == F_TIME
        if np.any(sel):
            fs = faces[sel]
            c = b.time_cells(fs)
            mid = g.face_midpoint(fs)
            out[sel, 0] = g.face_measure[fs] * self.pair.eta0(u[c], mid[:, 0], mid[:, 1])
        sel = cls == F_SIDE
        if np.any(sel):
            fs = faces[sel]
            uL, uR = u[L[sel]], u[R[sel]]
            hi = b.side_flux(np.maximum(uL, self.a), np.maximum(uR, self.a), fs)
            lo = b.side_flux(np.minimum(uL, self.a), np.minimum(uR, self.a), fs)
            out[sel] = hi - lo
        if np.any(cls == F_REMAP):
            raise SchemeError("Kruzkov fluxes are not defined on remap faces")
        return out

    def stencil(self, face):
        return self.base.stencil(face)


class BiasedFlux(NumericalFluxDef):
    """Planted fault: adds ``bias`` to the left cell's outgoing flux on interior faces."""

    def __init__(self, base, bias):
        super().__init__(base.grid, base.m)
        self.base = base
        self.bias = float(bias)
        self.name = f"biased({base.name}, {self.bias:g})"
        self.field = getattr(base, "field", None)

    def evaluate(self, gf, faces=None):
        return self.base.evaluate(gf, faces)

    def outgoing(self, gf, faces=None):
        faces = self._faces(faces)
        F = self.base.evaluate(gf, faces)
        Fl = F.copy()
        interior = (self.grid.face_left[faces] >= 0) & (self.grid.face_right[faces] >= 0)
        Fl[interior] += self.bias
        return Fl, -F

    def stencil(self, face):
        return self.base.stencil(face)


def cell_balance(flux_def, gf, source_def=None, cells=None):
    """Sum over faces of the outgoing flux minus the source, per cell (ncells, m)."""
    g = flux_def.grid
    Fl, Fr = flux_def.outgoing(gf)
    out = np.zeros((g.ncells, Fl.shape[1]))
    L, R = g.face_left, g.face_right
    np.add.at(out, L[L >= 0], Fl[L >= 0])
    np.add.at(out, R[R >= 0], Fr[R >= 0])
    if source_def is not None:
        out -= source_def.evaluate(gf)
    return out if cells is None else out[cells]


# ---------------------------------------------------------------------------
# schemes


def initial_values(grid, initial):
    """Exact averages of u0 over the initial faces of each bottom cell."""
    f = np.nonzero(grid.face_kind == INITIAL)[0]
    cells = grid.face_right[f]
    m = initial.m
    tot = np.zeros((grid.ncells, m))
    width = np.zeros(grid.ncells)
    for k, face in enumerate(f):
        xa, xb = sorted((grid.face_p0[face, 1], grid.face_p1[face, 1]))
        tot[cells[k]] += initial.integrate(xa, xb)
        width[cells[k]] += xb - xa
    ids = np.unique(cells)
    return ids, tot[ids] / width[ids][:, None]


def _top_faces(grid):
    """Closure faces (horizontal interior or remap) and their lower cells."""
    horiz = grid.is_horizontal() & ((grid.face_kind == INTERIOR) | (grid.face_kind == REMAP))
    return np.nonzero(horiz)[0]


class NumericalScheme:
    """Flux/source definition plus the explicit update that marches it.

    Attributes
    ----------
    flux_def, source_def
        What the balance audit evaluates.
    cfl_bound : float
        Largest stable lambda (inf when unconditional).
    closed : ndarray of bool
        Cells whose balance the update rule closes.
    """

    name = "scheme"

    def __init__(self, model, grid, flux_def, source_def, cfl_bound):
        self.model = model
        self.grid = grid
        self.flux_def = flux_def
        self.source_def = source_def
        self.cfl_bound = cfl_bound
        self.closed = self._closed_mask()

    def _closed_mask(self):
        mask = np.zeros(self.grid.ncells, dtype=bool)
        mask[self.grid.face_left[_top_faces(self.grid)]] = True
        return mask

    def initialize(self, initial):
        return initial_values(self.grid, initial)

    def update(self, grid, layer, values, initial):
        """Return (cell ids, values) of ``layer`` from the filled earlier layers."""
        raise NotImplementedError

    def cfl_violations(self, layer, values):
        """Number of cells of ``layer`` whose update is not monotone."""
        return 0


def lf_step(u, lam, flux):
    """One Lax-Friedrichs step on a row of cells with copied ghost values."""
    up = np.concatenate([u[1:], u[-1:]])
    um = np.concatenate([u[:1], u[:-1]])
    return 0.5 * (up + um) - 0.5 * lam * (flux(up) - flux(um))


def staggered_step(u, to_odd):
    """Averaging step: E -> O gains one cell (half cells copy), O -> E loses one."""
    if to_odd:
        out = np.empty((len(u) + 1,) + u.shape[1:])
        out[0] = u[0]
        out[-1] = u[-1]
        out[1:-1] = 0.5 * (u[:-1] + u[1:])
        return out
    return 0.5 * (u[:-1] + u[1:])


class LFScheme(NumericalScheme):
    name = "lax_friedrichs"

    def __init__(self, model, grid, lam):
        if not grid.family.startswith("uniform") or "remap_time" in grid.meta:
            raise SchemeError(f"lf_scheme needs a uniform grid, got family {grid.family!r}")
        if not model.homogeneous or model.source is not None:
            raise SchemeError("lf_scheme needs a position-independent flux and no source")
        dx, dt = grid.meta["dx"], grid.meta["dt"]
        lam_grid = dt / dx
        if abs(lam_grid - lam) > 1e-9 * abs(lam):
            raise SchemeError(f"grid ratio dt/dx = {lam_grid:.12g} does not match lambda = {lam}")
        speed = model.max_speed() if model.dflux is not None else None
        if speed is not None and lam_grid * speed > 1.0 + 1e-12:
            raise SchemeError(f"CFL violated: lambda*max|f'| = {lam_grid * speed:.6g} > 1")
        self.lam = lam_grid
        self.h = dx
        flux = LaxFriedrichsFlux(grid, model, dx, lam_grid)
        bound = np.inf if not speed else 1.0 / speed
        super().__init__(model, grid, flux, NumericalSourceDef(grid, model.m), bound)

    def _flux(self, u):
        z = np.zeros(len(u))
        return self.model.flux(u, z, z)

    def update(self, grid, layer, values, initial):
        prev = grid.layers[layer - 1]
        cur = grid.layers[layer]
        return cur, lf_step(values[prev], self.lam, self._flux)


class StaggeredLFScheme(NumericalScheme):
    name = "staggered_lax_friedrichs"

    def __init__(self, model, grid):
        if grid.family != "staggered":
            raise SchemeError(f"staggered_lf_scheme needs a staggered grid, got {grid.family!r}")
        u = model.sample_states(9)
        z = np.zeros(len(u))
        if np.any(model.flux(u, z, z) != 0.0):
            raise SchemeError("staggered Lax-Friedrichs is defined for f = 0 only")
        super().__init__(model, grid, StaggeredFlux(grid, model),
                         NumericalSourceDef(grid, model.m), np.inf)

    def _closed_mask(self):
        # time faces use the cell below, so every cell closes its own value
        return np.ones(self.grid.ncells, dtype=bool)

    def update(self, grid, layer, values, initial):
        prev = grid.layers[layer - 1]
        cur = grid.layers[layer]
        return cur, staggered_step(values[prev], to_odd=(layer % 2 == 1))


@dataclass
class _Plan:
    mode: str          # "closure" or "remap"
    A: np.ndarray      # cells filled by the update
    B: np.ndarray      # cells whose balance is solved
    S_top: np.ndarray  # measure of B's top faces
    S_bot: np.ndarray  # measure of B's horizontal bottom faces
    faces: np.ndarray  # other faces of B
    owner: np.ndarray  # position in B of each other face
    sign: np.ndarray   # +1 if B is the face's left cell
    top: np.ndarray    # top (closure or remap) faces, for the remap mode


@dataclass
class _RemapState:
    lo: np.ndarray
    hi: np.ndarray
    u: np.ndarray
    slopes: np.ndarray
    position: np.ndarray


class SpaceTimeLFScheme(NumericalScheme):
    """Lax-Friedrichs-type scheme for general layered space-time grids.

    Each cell of a layer is the unique cell above one lower cell; the update
    solves the lower cell's balance for it. On a remap layer the lower
    cells' balances give virtual values, which are reconstructed and
    integrated over the new cells.
    """

    name = "spacetime_lax_friedrichs"

    def __init__(self, model, grid, alpha=None, reconstruction="constant", source_def=None):
        if grid.family.startswith("staggered"):
            raise SchemeError("spacetime_lf_scheme does not close staggered layers; "
                              "use staggered_lf_scheme")
        if grid.family == "perturbed":
            raise SchemeError("perturbed grids are not layered")
        if alpha is None:
            if "lam" not in grid.meta:
                raise SchemeError("alpha must be given for grids without a lambda")
            alpha = 1.0 / grid.meta["lam"]
        if reconstruction not in rm.RECONSTRUCTIONS:
            raise SchemeError(f"unknown reconstruction {reconstruction!r}")
        self.alpha = float(alpha)
        self.reconstruction = reconstruction
        self.plans = self._build_plans(grid)
        self.remap_plan = next((p for p in self.plans.values() if p.mode == "remap"), None)
        if self.remap_plan is not None:
            self._position = np.full(grid.ncells, -1)
            self._position[self.remap_plan.B] = np.arange(len(self.remap_plan.B))
        flux = SpaceTimeFlux(grid, model, self.alpha, self)
        src = source_def if source_def is not None else default_source(model, grid)
        if src.grid is None:
            src.grid = grid
        bound = np.inf
        if model.dflux is not None:
            speed = model.max_speed()
            bound = np.inf if speed == 0 else 1.0 / speed
        super().__init__(model, grid, flux, src, bound)

    @staticmethod
    def _build_plans(grid):
        top = _top_faces(grid)
        above = grid.face_right[top]
        layer_above = grid.cell_layer[above]
        init = np.nonzero(grid.face_kind == INITIAL)[0]
        s_bot = np.zeros(grid.ncells)
        np.add.at(s_bot, above, grid.face_measure[top])
        np.add.at(s_bot, grid.face_right[init], grid.face_measure[init])
        order = np.argsort(layer_above, kind="stable")
        bounds = np.searchsorted(layer_above[order], np.arange(len(grid.layers) + 1))
        plans = {}
        for L in range(1, len(grid.layers)):
            fs = top[order[bounds[L]:bounds[L + 1]]]
            if len(fs) == 0:
                raise SchemeError(f"layer {L} has no cells above earlier layers")
            kinds = grid.face_kind[fs]
            B_of = grid.face_left[fs]
            A_of = grid.face_right[fs]
            if np.any(kinds == REMAP):
                if not np.all(kinds == REMAP):
                    raise SchemeError(f"layer {L} mixes remap and closure faces")
                mode = "remap"
                B = np.unique(B_of)
                B = B[np.argsort(grid.centroid[B, 1], kind="stable")]
                A = np.asarray(grid.layers[L])
                S_top = np.zeros(grid.ncells)
                np.add.at(S_top, B_of, grid.face_measure[fs])
                S_top = S_top[B]
            else:
                mode = "closure"
                if len(np.unique(B_of)) != len(B_of):
                    c = int(B_of[np.nonzero(np.bincount(B_of) > 1)[0][0]]) if len(B_of) else -1
                    raise SchemeError(f"cell {c} has several top faces; its balance cannot be "
                                      "closed for a single unknown")
                if len(np.unique(A_of)) != len(A_of):
                    raise SchemeError(f"a cell of layer {L} has several bottom faces")
                B, A = B_of, A_of
                S_top = grid.face_measure[fs]
            topset = set(fs.tolist())
            faces, owner, sign = [], [], []
            for k, c in enumerate(B):
                for f in grid.cell_faces[c]:
                    if f in topset:
                        continue
                    faces.append(f)
                    owner.append(k)
                    sign.append(1.0 if grid.face_left[f] == c else -1.0)
            plans[L] = _Plan(mode, A, B, S_top, s_bot[B], np.array(faces, dtype=int),
                             np.array(owner, dtype=int), np.array(sign), fs)
        return plans

    def _closure_rhs(self, plan, gf):
        F = self.flux_def.evaluate(gf, plan.faces)
        acc = np.zeros((len(plan.B), F.shape[1]))
        np.add.at(acc, plan.owner, plan.sign[:, None] * F)
        return self.source_def.evaluate(gf, plan.B) - acc

    def remap_state(self, gf):
        plan = self.remap_plan
        g = self.grid
        u = self._closure_rhs(plan, gf) / plan.S_top[:, None]
        fs = plan.top
        xa = np.minimum(g.face_p0[fs, 1], g.face_p1[fs, 1])
        xb = np.maximum(g.face_p0[fs, 1], g.face_p1[fs, 1])
        pos = self._position[g.face_left[fs]]
        lo = np.full(len(plan.B), np.inf)
        hi = np.full(len(plan.B), -np.inf)
        np.minimum.at(lo, pos, xa)
        np.maximum.at(hi, pos, xb)
        s = rm.slopes(lo, hi, u, self.reconstruction)
        return _RemapState(lo, hi, u, s, self._position)

    def update(self, grid, layer, values, initial):
        plan = self.plans[layer]
        gf = GridFunction(grid, values, initial)
        if plan.mode == "closure":
            return plan.A, self._closure_rhs(plan, gf) / plan.S_top[:, None]
        st = self.remap_state(gf)
        fs = plan.top
        g = self.grid
        xa = np.minimum(g.face_p0[fs, 1], g.face_p1[fs, 1])
        xb = np.maximum(g.face_p0[fs, 1], g.face_p1[fs, 1])
        pos = st.position[g.face_left[fs]]
        integ = rm.piece_integrals(st.lo, st.hi, st.u, st.slopes, pos, xa, xb)
        new_pos = np.full(g.ncells, -1)
        new_pos[plan.A] = np.arange(len(plan.A))
        vals = rm.new_averages(len(plan.A), new_pos[g.face_right[fs]], xb - xa, integ, st.u[pos])
        return plan.A, vals

    def cfl_violations(self, layer, values):
        if self.model.dflux is None or self.model.m != 1:
            return 0
        plan = self.plans[layer]
        g = self.grid
        cls = self.flux_def.cls[plan.faces]
        side = (cls == F_SIDE) | (cls == F_OUTER)
        fs, own, sg = plan.faces[side], plan.owner[side], plan.sign[side]
        if len(fs) == 0:
            return 0
        mid = g.face_midpoint(fs)
        uB = values[plan.B[own]]
        n_out = sg[:, None] * g.face_normal[fs]
        dfB = self.model.dflux(uB, mid[:, 0], mid[:, 1])
        speed_B = n_out[:, 0] + dfB * n_out[:, 1]
        S = g.face_measure[fs]
        outer = cls[side] == F_OUTER
        coef = np.where(outer, S * speed_B, 0.5 * S * (self.alpha + speed_B))
        bad_face = np.zeros(len(fs), dtype=bool)
        inner = ~outer
        if np.any(inner):
            nb = np.where(sg[inner] > 0, g.face_right[fs[inner]], g.face_left[fs[inner]])
            dfN = self.model.dflux(values[nb], mid[inner, 0], mid[inner, 1])
            a = np.maximum(np.abs(speed_B[inner]),
                           np.abs(n_out[inner, 0] + dfN * n_out[inner, 1]))
            bad_face[inner] = a > self.alpha * (1 + 1e-12)
        load = np.zeros(len(plan.B))
        np.add.at(load, own, coef)
        bad = load > plan.S_bot * (1 + 1e-12)
        np.logical_or.at(bad, own, bad_face)
        return int(bad.sum())


# ---------------------------------------------------------------------------
# constructors


def lf_scheme(model, grid, lam):
    """Lax-Friedrichs on a uniform grid with ratio lam = dt/dx."""
    return LFScheme(model, grid, lam)


def staggered_lf_scheme(model, grid):
    """Staggered Lax-Friedrichs for f = 0 (pure averaging)."""
    return StaggeredLFScheme(model, grid)


def spacetime_lf_scheme(model, grid, alpha=None, reconstruction="constant", source_def=None):
    """Lax-Friedrichs-type scheme for layered, locally refined, moving or remapped grids."""
    return SpaceTimeLFScheme(model, grid, alpha, reconstruction, source_def)


def kruzkov_entropy_fluxes(scheme, a):
    """(entropy flux definition, Kruzkov pair) for a scalar layered scheme."""
    if scheme.model.m != 1:
        raise SchemeError("Kruzkov entropy fluxes need a scalar model")
    if not isinstance(scheme.flux_def, LayeredFlux):
        raise SchemeError(f"no entropy flux for {scheme.flux_def.name}")
    pair = kruzkov_pair(scheme.model, a)
    return KruzkovFlux(scheme.flux_def, pair, a), pair


def entropy_source(scheme, pair):
    """Numerical entropy source g(u_C, centroid) V(C); zero without a source."""
    if scheme.model.source is None:
        return NumericalSourceDef(scheme.grid, 1)
    return MidpointSource(scheme.grid, 1, pair.g)


def cell_source_integral(grid, cell, w, density, points=DEFAULT_POINTS):
    """Integral of density(w, y) over one cell, by centroid-fan Gauss rule."""
    pts, wts = polygon_rule(grid.vertices[cell], points)
    W = np.tile(np.atleast_1d(np.asarray(w, dtype=float)), (len(pts), 1))
    val = density(W, pts[:, 0], pts[:, 1])
    if val.ndim == 1:
        val = val[:, None]
    return (wts[:, None] * val).sum(axis=0)


SCHEMES = ("lax_friedrichs", "staggered_lax_friedrichs", "spacetime_lax_friedrichs")


def build_scheme(name, model, grid, **params):
    if name in ("lax_friedrichs", "lf"):
        return lf_scheme(model, grid, params.get("lam", grid.meta.get("lam")))
    if name in ("staggered_lax_friedrichs", "staggered"):
        return staggered_lf_scheme(model, grid)
    if name in ("spacetime_lax_friedrichs", "spacetime"):
        return spacetime_lf_scheme(model, grid, params.get("alpha"),
                                   params.get("reconstruction", "constant"))
    raise SchemeError(f"unknown scheme {name!r}; choose from {SCHEMES}")
