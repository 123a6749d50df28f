"""Gauss-Legendre rules on segments, composite segment integration."""

from functools import lru_cache

import numpy as np

DEFAULT_POINTS = 5
DEFAULT_SEGMENTS = 4


@lru_cache(maxsize=None)
def gauss_legendre(n):
    """Nodes and weights of the n-point rule mapped to [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def segment_rule(p0, p1, segments=DEFAULT_SEGMENTS, points=DEFAULT_POINTS):
    """Composite rule on the straight segment p0 -> p1.

    Returns quadrature points with shape (segments*points, 2) and weights
    that already include the segment length, so ``sum(w * g(pts))``
    approximates the line integral of g.
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    xi, wi = gauss_legendre(points)
    k = np.arange(segments)[:, None]
    s = ((k + xi[None, :]) / segments).ravel()
    pts = p0[None, :] + s[:, None] * (p1 - p0)[None, :]
    length = float(np.hypot(*(p1 - p0)))
    w = np.tile(wi, segments) * (length / segments)
    return pts, w


def integrate_interval(g, a, b, breaks=(), points=16):
    """Integrate a scalar-or-vector function of x over [a, b].

    The interval is split at every breakpoint in ``breaks`` falling inside
    it, so integrands that are smooth between breakpoints are handled
    without loss of accuracy.
    """
    if b <= a:
        return 0.0 * np.asarray(g(np.array([a])))[0]
    inner = [c for c in breaks if a < c < b]
    edges = np.array([a, *sorted(inner), b])
    xi, wi = gauss_legendre(points)
    lo, hi = edges[:-1], edges[1:]
    x = (lo[:, None] + xi[None, :] * (hi - lo)[:, None]).ravel()
    w = (wi[None, :] * (hi - lo)[:, None]).ravel()
    vals = np.asarray(g(x), dtype=float)
    if vals.ndim == 1:
        return float(np.dot(w, vals))
    return np.tensordot(w, vals, axes=(0, 0))


def triangle_rule(a, b, c, points=DEFAULT_POINTS):
    """Collapsed-coordinate Gauss rule on the triangle (a, b, c)."""
    a, b, c = (np.asarray(p, dtype=float) for p in (a, b, c))
    xi, wi = gauss_legendre(points)
    u, v = np.meshgrid(xi, xi, indexing="ij")
    wu, wv = np.meshgrid(wi, wi, indexing="ij")
    # Duffy map of the unit square onto the reference triangle
    s = u.ravel()
    t = (v * (1.0 - u)).ravel()
    jac = (1.0 - u).ravel()
    area2 = abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    pts = a[None, :] + s[:, None] * (b - a)[None, :] + t[:, None] * (c - a)[None, :]
    w = (wu * wv).ravel() * jac * area2
    return pts, w


def polygon_rule(vertices, points=DEFAULT_POINTS):
    """Area rule on a simple star-shaped polygon by fanning from the centroid."""
    v = np.asarray(vertices, dtype=float)
    center = v.mean(axis=0)
    pts, ws = [], []
    for i in range(len(v)):
        p, w = triangle_rule(center, v[i], v[(i + 1) % len(v)], points)
        pts.append(p)
        ws.append(w)
    return np.concatenate(pts), np.concatenate(ws)
