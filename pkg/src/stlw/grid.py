"""Space-time grids in the (t, x) half-plane.

All generators produce explicit polygons; faces are recovered from the
polygons by matching collinear, oppositely oriented edge pieces, so hanging
vertices (local time stepping, staggered layers, remap hyperplanes) need no
special handling.
"""

from dataclasses import dataclass, field
import math

import numpy as np

INTERIOR, INITIAL, OUTER, REMAP = 0, 1, 2, 3
KIND_NAMES = {INTERIOR: "interior", INITIAL: "initial", OUTER: "outer", REMAP: "remap"}
BOUNDARY = -1

_KEY_DIGITS = 10


class GridError(ValueError):
    """Invalid grid parameters or a failed construction."""


@dataclass(frozen=True)
class Cell:
    id: int
    vertices: np.ndarray
    layer: int
    volume: float


@dataclass(frozen=True)
class Face:
    id: int
    endpoints: np.ndarray
    left: int
    right: int
    normal: np.ndarray
    measure: float
    kind: str


def shoelace(v):
    v = np.asarray(v, dtype=float)
    t, x = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(t, np.roll(x, -1)) - np.dot(np.roll(t, -1), x))


def polygon_centroid(v):
    v = np.asarray(v, dtype=float)
    t, x = v[:, 0], v[:, 1]
    t1, x1 = np.roll(t, -1), np.roll(x, -1)
    cross = t * x1 - t1 * x
    a = 0.5 * cross.sum()
    return np.array([((t + t1) * cross).sum(), ((x + x1) * cross).sum()]) / (6.0 * a)


def polygon_diameter(v):
    v = np.asarray(v, dtype=float)
    d = v[:, None, :] - v[None, :, :]
    return float(np.sqrt((d**2).sum(axis=-1)).max())


@dataclass
class SpaceTimeGrid:
    """Cells and faces tiling the slab [0, T] x [x_lo, x_hi].

    Face orientation: ``normal`` points from ``left`` into ``right``. Initial
    faces have ``left == BOUNDARY`` and normal (1, 0). Outer faces (lateral
    sides and the top of the truncated slab) have ``right == BOUNDARY`` and
    an outward normal. Interior faces use the canonical normal with positive
    x component, or (1, 0) for faces of constant time.
    """

    vertices: list
    cell_layer: np.ndarray
    volume: np.ndarray
    centroid: np.ndarray
    face_p0: np.ndarray
    face_p1: np.ndarray
    face_left: np.ndarray
    face_right: np.ndarray
    face_kind: np.ndarray
    face_normal: np.ndarray
    face_measure: np.ndarray
    cell_faces: list
    layers: list
    domain: tuple
    h: float
    family: str = "generic"
    meta: dict = field(default_factory=dict)
    layer_desc: list = None
    cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def ncells(self):
        return len(self.vertices)

    @property
    def nfaces(self):
        return len(self.face_left)

    @property
    def T(self):
        return self.domain[0]

    @property
    def x_lo(self):
        return self.domain[1]

    @property
    def x_hi(self):
        return self.domain[2]

    def cell(self, i):
        return Cell(int(i), self.vertices[i], int(self.cell_layer[i]), float(self.volume[i]))

    def face(self, i):
        return Face(
            id=int(i),
            endpoints=np.stack([self.face_p0[i], self.face_p1[i]]),
            left=int(self.face_left[i]),
            right=int(self.face_right[i]),
            normal=self.face_normal[i].copy(),
            measure=float(self.face_measure[i]),
            kind=KIND_NAMES[int(self.face_kind[i])],
        )

    @property
    def cells(self):
        return [self.cell(i) for i in range(self.ncells)]

    @property
    def faces(self):
        return [self.face(i) for i in range(self.nfaces)]

    def face_sign(self, face_id, cell_id):
        """+1 if ``cell_id`` is the left cell of the face, -1 if it is the right."""
        if self.face_left[face_id] == cell_id:
            return 1.0
        if self.face_right[face_id] == cell_id:
            return -1.0
        raise KeyError(f"cell {cell_id} is not adjacent to face {face_id}")

    def face_midpoint(self, ids=None):
        if ids is None:
            return 0.5 * (self.face_p0 + self.face_p1)
        return 0.5 * (self.face_p0[ids] + self.face_p1[ids])

    def _per_cell(self, fn):
        """Apply ``fn`` to stacked vertex arrays of equal size; one value per cell."""
        out = np.empty(self.ncells)
        by_size = {}
        for i, v in enumerate(self.vertices):
            by_size.setdefault(len(v), []).append(i)
        for ids in by_size.values():
            out[ids] = fn(np.stack([self.vertices[i] for i in ids]))
        return out

    def diameters(self):
        def diam(V):
            d = V[:, :, None, :] - V[:, None, :, :]
            return np.sqrt((d**2).sum(axis=-1)).max(axis=(1, 2))
        return self._per_cell(diam)

    def perimeters(self):
        def perim(V):
            e = np.roll(V, -1, axis=1) - V
            return np.hypot(e[..., 0], e[..., 1]).sum(axis=1)
        return self._per_cell(perim)

    def time_extent(self):
        """(t_min, t_max) for every cell."""
        return (self._per_cell(lambda V: V[..., 0].min(axis=1)),
                self._per_cell(lambda V: V[..., 0].max(axis=1)))

    def lateral_cells(self):
        """Boolean mask of cells touching x = x_lo or x = x_hi."""
        tol = 1e-12 * max(1.0, abs(self.x_hi - self.x_lo))
        lo = self._per_cell(lambda V: V[..., 1].min(axis=1))
        hi = self._per_cell(lambda V: V[..., 1].max(axis=1))
        return (lo <= self.x_lo + tol) | (hi >= self.x_hi - tol)

    def is_horizontal(self, ids=None):
        """Faces of constant time (normal parallel to the t axis)."""
        n = self.face_normal if ids is None else self.face_normal[ids]
        return np.abs(n[..., 1]) < 1e-14

    def cross_section(self, t):
        """Cells intersecting the line {t} x R with their x-intervals.

        Cells are taken half-open in time, [t_min, t_max), so each point is
        covered once; at t = T the top layer is used. Returns (ids, lo, hi)
        sorted by lo.
        """
        ids, lo, hi = [], [], []
        for i, v in enumerate(self.vertices):
            tmin, tmax = v[:, 0].min(), v[:, 0].max()
            inside = tmin <= t < tmax or (t >= self.T and tmax >= self.T and tmin < t)
            if not inside:
                continue
            xs = _polygon_slice(v, t)
            if xs is not None:
                ids.append(i)
                lo.append(xs[0])
                hi.append(xs[1])
        order = np.argsort(lo, kind="stable")
        return np.asarray(ids)[order], np.asarray(lo)[order], np.asarray(hi)[order]


def _polygon_slice(v, t):
    """x-interval of a convex polygon on the line of constant time t."""
    xs = []
    n = len(v)
    for k in range(n):
        a, b = v[k], v[(k + 1) % n]
        if a[0] == b[0]:
            if a[0] == t:
                xs.extend([a[1], b[1]])
            continue
        lo_t, hi_t = min(a[0], b[0]), max(a[0], b[0])
        if lo_t <= t <= hi_t:
            s = (t - a[0]) / (b[0] - a[0])
            xs.append(a[1] + s * (b[1] - a[1]))
    if not xs:
        return None
    return min(xs), max(xs)


# ---------------------------------------------------------------------------
# face assembly


def _canonical_normals(d):
    """Unit normals with positive x component, or (1, 0) for constant-time lines."""
    n = np.stack([-d[:, 1], d[:, 0]], axis=1)
    flip = (n[:, 1] < -1e-14) | ((np.abs(n[:, 1]) <= 1e-14) & (n[:, 0] < 0))
    n[flip] *= -1.0
    horiz = np.abs(n[:, 1]) <= 1e-14
    n[horiz] = (1.0, 0.0)
    return n + 0.0


def _polygon_arrays(polys):
    """Areas and centroids, vectorized over polygons of equal vertex count."""
    n = len(polys)
    area = np.empty(n)
    cen = np.empty((n, 2))
    by_size = {}
    for i, p in enumerate(polys):
        by_size.setdefault(len(p), []).append(i)
    for size, ids in by_size.items():
        V = np.stack([polys[i] for i in ids])
        t, x = V[..., 0], V[..., 1]
        t1, x1 = np.roll(t, -1, axis=1), np.roll(x, -1, axis=1)
        cross = t * x1 - t1 * x
        a = 0.5 * cross.sum(axis=1)
        area[ids] = a
        with np.errstate(divide="ignore", invalid="ignore"):
            cen[ids, 0] = ((t + t1) * cross).sum(axis=1) / (6.0 * a)
            cen[ids, 1] = ((x + x1) * cross).sum(axis=1) / (6.0 * a)
    return area, cen


def _sweep_line(edges, tol):
    """Split collinear edges into maximal pieces with a fixed pair of owners.

    ``edges`` is a list of (q0, q1, sigma, cell) with q0 < q1 along the
    line direction; yields (a, b, plus_cell, minus_cell) with -1 for a
    missing side.
    """
    q0, q1 = edges[0][0], edges[0][1]
    d = (q1 - q0) / math.hypot(*(q1 - q0))
    origin = q0
    s = [(float(np.dot(e[0] - origin, d)), float(np.dot(e[1] - origin, d))) for e in edges]
    cand = sorted(
        [(s0, e[0]) for (s0, _), e in zip(s, edges)]
        + [(s1, e[1]) for (_, s1), e in zip(s, edges)],
        key=lambda item: item[0],
    )
    merged, reps = [cand[0][0]], [cand[0][1]]
    for v, q in cand[1:]:
        if v - merged[-1] > tol:
            merged.append(v)
            reps.append(q)
    pts = np.array(merged)
    nseg = len(pts) - 1
    plus = np.full(nseg, -1)
    minus = np.full(nseg, -1)
    for (s0, s1), (_, _, sigma, ci) in zip(s, edges):
        k0 = int(np.argmin(np.abs(pts - s0)))
        k1 = int(np.argmin(np.abs(pts - s1)))
        target = plus if sigma > 0 else minus
        if np.any(target[k0:k1] >= 0):
            raise GridError(f"overlapping cells {ci} and {target[k0:k1].max()}")
        target[k0:k1] = ci
    k = 0
    while k < nseg:
        pair = (plus[k], minus[k])
        if pair == (-1, -1):
            k += 1
            continue
        j = k + 1
        while j < nseg and (plus[j], minus[j]) == pair:
            j += 1
        yield np.array(reps[k], dtype=float), np.array(reps[j], dtype=float), pair[0], pair[1]
        k = j


def assemble(polygons, layer_of, domain, h, family="generic", meta=None,
             remap_times=(), layer_desc=None):
    """Build a SpaceTimeGrid from ccw polygons and layer indices.

    Edges shared verbatim by two cells are paired directly; the remaining
    edges are swept line by line so that partially overlapping edges
    (hanging vertices) are split into faces.
    """
    T, x_lo, x_hi = domain
    verts = [np.asarray(p, dtype=float) for p in polygons]
    ncells = len(verts)
    volume, centroid = _polygon_arrays(verts)
    bad = np.nonzero(~(volume > 0))[0]
    if bad.size:
        i = int(bad[0])
        raise GridError(f"cell {i} (layer {layer_of[i]}) has non-positive area {volume[i]:g}")
    if min(p[:, 0].min() for p in verts) < 0:
        raise GridError("cells extend below t = 0")
    scale = max(T, x_hi - x_lo, 1.0)
    tol = 1e-11 * scale

    A = np.concatenate(verts)
    B = np.concatenate([np.roll(p, -1, axis=0) for p in verts])
    cell = np.repeat(np.arange(ncells), [len(p) for p in verts])
    swap = (A[:, 0] > B[:, 0]) | ((A[:, 0] == B[:, 0]) & (A[:, 1] > B[:, 1]))
    q0 = np.where(swap[:, None], B, A)
    q1 = np.where(swap[:, None], A, B)
    sigma = np.where(swap, -1, 1)

    key = np.round(np.hstack([q0, q1]) / scale, _KEY_DIGITS) + 0.0
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    if np.any(counts > 2):
        raise GridError("more than two cells share an edge")
    order = np.argsort(inv, kind="stable")
    paired = counts[inv[order]] == 2
    pe = order[paired].reshape(-1, 2)
    if np.any(sigma[pe[:, 0]] == sigma[pe[:, 1]]):
        raise GridError("cells overlap along a shared edge")
    plus_e = np.where(sigma[pe[:, 0]] > 0, pe[:, 0], pe[:, 1])
    minus_e = np.where(sigma[pe[:, 0]] > 0, pe[:, 1], pe[:, 0])

    fa = [q0[plus_e]]
    fb = [q1[plus_e]]
    fplus = [cell[plus_e]]
    fminus = [cell[minus_e]]

    lone = order[~paired]
    lines = {}
    for e in lone:
        d = q1[e] - q0[e]
        d = d / math.hypot(d[0], d[1])
        c = d[0] * q0[e][1] - d[1] * q0[e][0]
        k = (round(d[0], _KEY_DIGITS) + 0.0, round(d[1], _KEY_DIGITS) + 0.0,
             round(c / scale, _KEY_DIGITS) + 0.0)
        lines.setdefault(k, []).append((q0[e], q1[e], sigma[e], cell[e]))
    sa, sb, sp, sm = [], [], [], []
    for k in sorted(lines):
        for a, b, cp, cm in _sweep_line(lines[k], tol):
            sa.append(a)
            sb.append(b)
            sp.append(cp)
            sm.append(cm)
    if sa:
        fa.append(np.array(sa))
        fb.append(np.array(sb))
        fplus.append(np.array(sp, dtype=int))
        fminus.append(np.array(sm, dtype=int))
    fa = np.concatenate(fa)
    fb = np.concatenate(fb)
    fplus = np.concatenate(fplus)
    fminus = np.concatenate(fminus)

    d = fb - fa
    measure = np.hypot(d[:, 0], d[:, 1])
    d = d / measure[:, None]
    lnorm = np.stack([-d[:, 1], d[:, 0]], axis=1)
    cn = _canonical_normals(d)
    plus_right = (lnorm * cn).sum(axis=1) > 0
    both = (fplus >= 0) & (fminus >= 0)
    left = np.where(plus_right, fminus, fplus)
    right = np.where(plus_right, fplus, fminus)
    kind = np.full(len(fa), INTERIOR)
    normal = cn.copy()

    owner = np.where(fplus >= 0, fplus, fminus)
    out = np.where((fplus >= 0)[:, None], -lnorm, lnorm)
    on_t0 = (np.abs(fa[:, 0]) <= tol) & (np.abs(fb[:, 0]) <= tol)
    init = ~both & on_t0
    outer = ~both & ~on_t0
    left[init], right[init], kind[init] = BOUNDARY, owner[init], INITIAL
    normal[init] = (1.0, 0.0)
    left[outer], right[outer], kind[outer] = owner[outer], BOUNDARY, OUTER
    normal[outer] = out[outer]
    horiz = np.abs(cn[:, 1]) <= 1e-14
    for tr in remap_times:
        kind[both & horiz & (np.abs(fa[:, 0] - tr) <= tol)] = REMAP

    # order faces by midpoint (time, then x)
    mid = np.round(0.5 * (fa + fb) / scale, _KEY_DIGITS)
    perm = np.lexsort((mid[:, 1], mid[:, 0]))
    fa, fb, left, right = fa[perm], fb[perm], left[perm], right[perm]
    kind, normal, measure = kind[perm], normal[perm] + 0.0, measure[perm]

    nf = len(fa)
    fid = np.arange(nf)
    owners = np.concatenate([left, right])
    fids = np.concatenate([fid, fid])
    keep = owners >= 0
    owners, fids = owners[keep], fids[keep]
    srt = np.lexsort((fids, owners))
    split = np.searchsorted(owners[srt], np.arange(1, ncells))
    cell_faces = np.split(fids[srt], split)

    layer_of = np.asarray(layer_of, dtype=int)
    nlayers = int(layer_of.max()) + 1 if ncells else 0
    srt = np.lexsort((centroid[:, 1], layer_of))
    bounds = np.searchsorted(layer_of[srt], np.arange(1, nlayers))
    layers = np.split(srt, bounds)
    return SpaceTimeGrid(
        vertices=verts,
        cell_layer=layer_of,
        volume=volume,
        centroid=centroid,
        face_p0=fa,
        face_p1=fb,
        face_left=left,
        face_right=right,
        face_kind=kind,
        face_normal=normal,
        face_measure=measure,
        cell_faces=cell_faces,
        layers=layers,
        domain=(float(T), float(x_lo), float(x_hi)),
        h=float(h),
        family=family,
        meta=dict(meta or {}),
        layer_desc=layer_desc,
    )


def from_tables(polygons, layer_of, face_p0, face_p1, face_left, face_right, face_kind,
                domain, h, family="generic", meta=None):
    """Grid from explicit cell and face tables (no edge matching).

    Derived quantities use the same formulas as ``assemble``, so a grid
    rebuilt from its own tables has bit-identical metrics.
    """
    verts = [np.asarray(p, dtype=float) for p in polygons]
    ncells = len(verts)
    volume, centroid = _polygon_arrays(verts)
    fa = np.asarray(face_p0, dtype=float).reshape(-1, 2)
    fb = np.asarray(face_p1, dtype=float).reshape(-1, 2)
    left = np.asarray(face_left, dtype=int)
    right = np.asarray(face_right, dtype=int)
    kind = np.asarray(face_kind, dtype=int)
    d = fb - fa
    measure = np.hypot(d[:, 0], d[:, 1])
    if np.any(~(measure > 0)):
        raise GridError(f"face {int(np.nonzero(~(measure > 0))[0][0])} has zero length")
    d = d / measure[:, None]
    normal = _canonical_normals(d)
    normal[kind == INITIAL] = (1.0, 0.0)
    outer = np.nonzero(kind == OUTER)[0]
    if outer.size:
        lnorm = np.stack([-d[outer, 1], d[outer, 0]], axis=1)
        away = 0.5 * (fa[outer] + fb[outer]) - centroid[left[outer]]
        flip = (lnorm * away).sum(axis=1) < 0
        normal[outer] = np.where(flip[:, None], -lnorm, lnorm)
    normal = normal + 0.0

    fid = np.arange(len(fa))
    owners = np.concatenate([left, right])
    fids = np.concatenate([fid, fid])
    keep = owners >= 0
    owners, fids = owners[keep], fids[keep]
    srt = np.lexsort((fids, owners))
    split = np.searchsorted(owners[srt], np.arange(1, ncells))
    cell_faces = np.split(fids[srt], split)

    layer_of = np.asarray(layer_of, dtype=int)
    nlayers = int(layer_of.max()) + 1 if ncells else 0
    srt = np.lexsort((centroid[:, 1], layer_of))
    bounds = np.searchsorted(layer_of[srt], np.arange(1, nlayers))
    layers = np.split(srt, bounds)
    T, x_lo, x_hi = domain
    return SpaceTimeGrid(
        vertices=verts, cell_layer=layer_of, volume=volume, centroid=centroid,
        face_p0=fa, face_p1=fb, face_left=left, face_right=right, face_kind=kind,
        face_normal=normal, face_measure=measure, cell_faces=cell_faces, layers=layers,
        domain=(float(T), float(x_lo), float(x_hi)), h=float(h), family=family,
        meta=dict(meta or {}),
    )


def from_layers(layer_desc, domain, h, family, meta=None, remap_times=()):
    """Grid from per-layer descriptions (t0, t1, bottom_breaks, top_breaks).

    Bottom and top breakpoints of one layer must have equal length; cell j
    is the quadrilateral between breakpoints j and j+1.
    """
    polys, layer_of = [], []
    for L, (t0, t1, xb, xt) in enumerate(layer_desc):
        xb = np.asarray(xb, dtype=float)
        xt = np.asarray(xt, dtype=float)
        for j in range(len(xb) - 1):
            polys.append([(t0, xb[j]), (t1, xt[j]), (t1, xt[j + 1]), (t0, xb[j + 1])])
            layer_of.append(L)
    return assemble(polys, layer_of, domain, h, family, meta, remap_times, layer_desc)


# ---------------------------------------------------------------------------
# generators


def _check_domain(h, T, x_lo, x_hi):
    if not (h > 0 and T > 0 and x_hi > x_lo):
        raise GridError(f"invalid grid parameters h={h}, T={T}, x=[{x_lo}, {x_hi}]")


def _snap(length, step):
    n = max(1, int(round(length / step)))
    return n


def _breaks(x_lo, x_hi, n):
    return x_lo + (x_hi - x_lo) * np.arange(n + 1) / n


def _times(T, n):
    return T * np.arange(n + 1) / n


def build_uniform_grid(h, lam, T, x_lo, x_hi):
    """Rectangular cells of width h and duration lam*h (snapped to the slab)."""
    _check_domain(h, T, x_lo, x_hi)
    if not lam > 0:
        raise GridError(f"lambda must be positive, got {lam}")
    nx = _snap(x_hi - x_lo, h)
    nt = _snap(T, lam * h)
    xs = _breaks(x_lo, x_hi, nx)
    ts = _times(T, nt)
    desc = [(ts[n], ts[n + 1], xs, xs) for n in range(nt)]
    meta = {"nx": nx, "nt": nt, "lam": float(lam), "dx": (x_hi - x_lo) / nx, "dt": T / nt}
    return from_layers(desc, (T, x_lo, x_hi), h, "uniform", meta)


def build_staggered_grid(h, dt, T, x_lo, x_hi):
    """Alternating layers: even layers on x_lo + j*h, odd layers shifted by h/2.

    Odd layers end in two half-width cells so that every layer tiles
    [x_lo, x_hi].
    """
    _check_domain(h, T, x_lo, x_hi)
    if not dt > 0:
        raise GridError(f"dt must be positive, got {dt}")
    nx = _snap(x_hi - x_lo, h)
    nt = _snap(T, dt)
    xs = _breaks(x_lo, x_hi, nx)
    mids = 0.5 * (xs[:-1] + xs[1:])
    xo = np.concatenate([[x_lo], mids, [x_hi]])
    ts = _times(T, nt)
    desc = []
    for n in range(nt):
        b = xs if n % 2 == 0 else xo
        desc.append((ts[n], ts[n + 1], b, b))
    meta = {"nx": nx, "nt": nt, "dx": (x_hi - x_lo) / nx, "dt": T / nt}
    return from_layers(desc, (T, x_lo, x_hi), h, "staggered", meta)


def build_local_timestep_grid(h, lambda_coarse, region, r, T, x_lo, x_hi):
    """Uniform grid whose columns inside ``region`` take r sub-steps per slab.

    Layers are numbered by sub-step: coarse cells of slab n sit in layer
    n*r, fine cells of sub-step s in layer n*r + s. Lateral faces between
    a coarse cell and the fine column next to it are split into r pieces.
    """
    _check_domain(h, T, x_lo, x_hi)
    if not lambda_coarse > 0:
        raise GridError("lambda must be positive")
    if int(r) != r or r < 1:
        raise GridError(f"refinement factor must be a positive integer, got {r}")
    r = int(r)
    nx = _snap(x_hi - x_lo, h)
    nt = _snap(T, lambda_coarse * h)
    xs = _breaks(x_lo, x_hi, nx)
    dx = (x_hi - x_lo) / nx
    a, b = region
    ja, jb = (a - x_lo) / dx, (b - x_lo) / dx
    if abs(ja - round(ja)) > 1e-9 or abs(jb - round(jb)) > 1e-9 or not (0 <= round(ja) < round(jb) <= nx):
        raise GridError(f"region {region} is not aligned to the x-breakpoints")
    ja, jb = int(round(ja)), int(round(jb))
    ts = _times(T, nt)
    polys, layer_of = [], []
    for n in range(nt):
        t0, t1 = ts[n], ts[n + 1]
        sub = [t0 + (t1 - t0) * s / r for s in range(r)] + [t1]
        for j in range(nx):
            x0, x1 = xs[j], xs[j + 1]
            if ja <= j < jb:
                for s in range(r):
                    polys.append([(sub[s], x0), (sub[s + 1], x0), (sub[s + 1], x1), (sub[s], x1)])
                    layer_of.append(n * r + s)
            else:
                polys.append([(t0, x0), (t1, x0), (t1, x1), (t0, x1)])
                layer_of.append(n * r)
    meta = {"nx": nx, "nt": nt, "lam": float(lambda_coarse), "r": r,
            "region": (float(a), float(b)), "dx": dx, "dt": T / nt}
    return assemble(polys, layer_of, (T, x_lo, x_hi), h, "local_timestep", meta)


def build_moving_vertex_grid(h, lam, T, x_lo, x_hi, vertex_velocity):
    """Quadrilateral cells whose vertices move with ``vertex_velocity(t, x)``.

    Interior vertex positions are advanced by explicit Euler per layer; the
    two lateral vertices stay on x_lo and x_hi.
    """
    _check_domain(h, T, x_lo, x_hi)
    if not lam > 0:
        raise GridError("lambda must be positive")
    nx = _snap(x_hi - x_lo, h)
    nt = _snap(T, lam * h)
    ts = _times(T, nt)
    x = _breaks(x_lo, x_hi, nx)
    desc = []
    for n in range(nt):
        dt = ts[n + 1] - ts[n]
        v = np.array([float(vertex_velocity(ts[n], xi)) for xi in x[1:-1]])
        xn = x.copy()
        xn[1:-1] = x[1:-1] + dt * v
        if np.any(np.diff(xn) <= 0):
            j = int(np.argmin(np.diff(xn)))
            raise GridError(f"cell inversion in layer {n} (column {j})")
        desc.append((ts[n], ts[n + 1], x, xn))
        x = xn
    meta = {"nx": nx, "nt": nt, "lam": float(lam), "dx": (x_hi - x_lo) / nx, "dt": T / nt}
    return from_layers(desc, (T, x_lo, x_hi), h, "moving", meta)


def build_perturbed_grid(h, T, x_lo, x_hi, jitter=0.2, seed=0, angle=0.3):
    """Delaunay triangulation of a jittered, rotated point lattice.

    The rotation keeps the lattice incommensurate with any axis-aligned
    cube lattice; slab sides carry evenly spaced points so the triangles
    tile the slab exactly. Not marchable; intended for geometric
    diagnostics. ``h`` is the nominal spacing scale: the lattice step is
    h / (sqrt(2) (1 + 2 jitter)).
    """
    from scipy.spatial import Delaunay

    _check_domain(h, T, x_lo, x_hi)
    rng = np.random.default_rng(seed)
    step = h / (math.sqrt(2.0) * (1.0 + 2.0 * jitter))
    W = x_hi - x_lo
    R = math.hypot(T, W)
    n = int(math.ceil(R / step)) + 1
    k = np.arange(-n, n + 1) * step
    U, V = np.meshgrid(k, k, indexing="ij")
    P = np.stack([U.ravel(), V.ravel()], axis=1)
    P += rng.uniform(-jitter, jitter, size=P.shape) * step
    c, s_ = math.cos(angle), math.sin(angle)
    P = P @ np.array([[c, s_], [-s_, c]]) + np.array([0.5 * T, 0.5 * (x_lo + x_hi)])
    margin = 0.5 * step
    inside = ((P[:, 0] > margin) & (P[:, 0] < T - margin)
              & (P[:, 1] > x_lo + margin) & (P[:, 1] < x_hi - margin))
    P = P[inside]
    nt = int(math.ceil(T / step))
    nx = int(math.ceil(W / step))
    ts = _times(T, nt)
    xs = _breaks(x_lo, x_hi, nx)
    ring = np.concatenate([
        np.stack([ts, np.full_like(ts, x_lo)], axis=1),
        np.stack([ts, np.full_like(ts, x_hi)], axis=1),
        np.stack([np.zeros(nx - 1), xs[1:-1]], axis=1),
        np.stack([np.full(nx - 1, T), xs[1:-1]], axis=1),
    ])
    pts = np.concatenate([ring, P])
    tri = Delaunay(pts).simplices
    V = pts[tri]
    e1, e2 = V[:, 1] - V[:, 0], V[:, 2] - V[:, 0]
    area2 = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    V[area2 < 0] = V[area2 < 0][:, ::-1]
    keep = np.abs(area2) > 2e-14 * step * step
    V = V[keep]
    polys = list(V)
    layer_of = np.minimum(V[:, :, 0].mean(axis=1) // step, nt - 1).astype(int)
    meta = {"jitter": jitter, "seed": seed, "angle": angle, "step": step}
    # renumber layers densely
    layer_of = np.unique(layer_of, return_inverse=True)[1].tolist()
    return assemble(polys, layer_of, (T, x_lo, x_hi), h, "perturbed", meta)


def insert_remap_layer(grid, t_remap, new_breakpoints):
    """Rebuild every layer starting at or after ``t_remap`` on new breakpoints.

    The faces on the hyperplane t = t_remap become remap faces: one per
    positive-length overlap of an old and a new cell, old cell on the left.
    """
    if grid.layer_desc is None:
        raise GridError("remapping needs a grid built from layer descriptions")
    starts = [d[0] for d in grid.layer_desc]
    tol = 1e-12 * max(1.0, grid.T)
    idx = [i for i, t0 in enumerate(starts) if abs(t0 - t_remap) <= tol]
    if not idx or idx[0] == 0:
        raise GridError(f"t_remap={t_remap} is not an interior layer boundary")
    nb = np.asarray(new_breakpoints, dtype=float)
    if (np.any(np.diff(nb) <= 0) or abs(nb[0] - grid.x_lo) > tol
            or abs(nb[-1] - grid.x_hi) > tol):
        raise GridError("new breakpoints must increase strictly and span [x_lo, x_hi]")
    nb[0], nb[-1] = grid.x_lo, grid.x_hi
    k = idx[0]
    t_exact = starts[k]
    desc = list(grid.layer_desc[:k])
    desc += [(t0, t1, nb, nb) for (t0, t1, _, _) in grid.layer_desc[k:]]
    meta = dict(grid.meta)
    meta.update({"remap_time": float(t_exact), "remap_layer": k})
    return from_layers(desc, grid.domain, grid.h, grid.family + "+remap", meta,
                       remap_times=(t_exact,))


# ---------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class GridMetrics:
    h_max: float
    quasi_ratio: float
    surface_ratio: float
    cells_per_layer: tuple  # (min, max, mean)


def grid_metrics(grid):
    """Diameter, quasiuniformity and surface ratios over non-lateral cells.

    Cells touching the lateral slab boundary are truncation artifacts (the
    model grid covers the whole line) and are left out whenever interior
    cells exist.
    """
    sel = ~grid.lateral_cells()
    if not np.any(sel):
        sel = np.ones(grid.ncells, dtype=bool)
    diam = grid.diameters()[sel]
    h_max = float(diam.max())
    quasi = float(grid.volume[sel].min() / h_max**2)
    surf = float(grid.perimeters()[sel].max() / h_max)
    counts = np.array([len(L) for L in grid.layers])
    return GridMetrics(h_max, quasi, surf, (int(counts.min()), int(counts.max()), float(counts.mean())))
