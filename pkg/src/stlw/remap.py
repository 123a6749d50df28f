"""Conservative remapping of cell averages between two partitions of a line."""

from dataclasses import dataclass

import numpy as np

RECONSTRUCTIONS = ("constant", "minmod")


class RemapError(RuntimeError):
    """Overlap measures failed to partition a cell."""


@dataclass(frozen=True)
class RemapResult:
    """New averages plus the per-overlap integrals of the reconstruction.

    ``old_index[k]`` and ``new_index[k]`` name the cells of overlap k,
    which spans ``[lo[k], hi[k]]`` and carries ``integrals[k]`` (shape
    (K, m)).
    """

    values: np.ndarray
    old_index: np.ndarray
    new_index: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    integrals: np.ndarray


def minmod(a, b):
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def slopes(lo, hi, u, reconstruction="constant"):
    """Per-cell slopes of the reconstruction; zero at the two end cells."""
    u = np.asarray(u, dtype=float)
    if reconstruction == "constant":
        return np.zeros_like(u)
    if reconstruction != "minmod":
        raise ValueError(f"unknown reconstruction {reconstruction!r}; use one of {RECONSTRUCTIONS}")
    c = 0.5 * (np.asarray(lo) + np.asarray(hi))
    s = np.zeros_like(u)
    if len(u) < 3:
        return s
    fwd = (u[2:] - u[1:-1]) / (c[2:] - c[1:-1])[:, None]
    bwd = (u[1:-1] - u[:-2]) / (c[1:-1] - c[:-2])[:, None]
    s[1:-1] = minmod(fwd, bwd)
    return s


def piece_integrals(lo, hi, u, s, owner, a, b):
    """Integral of the reconstruction of cell ``owner`` over [a, b]."""
    c = 0.5 * (np.asarray(lo)[owner] + np.asarray(hi)[owner])
    mid = 0.5 * (a + b)
    length = (b - a)[:, None]
    return length * (u[owner] + s[owner] * (mid - c)[:, None])


def overlaps(old_lo, old_hi, new_lo, new_hi, tol=1e-13):
    """Positive-length intersections of two sorted partitions of one interval."""
    old_lo, old_hi = np.asarray(old_lo, float), np.asarray(old_hi, float)
    new_lo, new_hi = np.asarray(new_lo, float), np.asarray(new_hi, float)
    span = max(old_hi[-1] - old_lo[0], 1.0)
    if abs(old_lo[0] - new_lo[0]) > tol * span or abs(old_hi[-1] - new_hi[-1]) > tol * span:
        raise RemapError("old and new partitions cover different intervals")
    pts = np.union1d(np.concatenate([old_lo, old_hi[-1:]]), np.concatenate([new_lo, new_hi[-1:]]))
    keep = np.concatenate([[True], np.diff(pts) > tol * span])
    pts = pts[keep]
    a, b = pts[:-1], pts[1:]
    mid = 0.5 * (a + b)
    o = np.searchsorted(old_hi, mid)
    n = np.searchsorted(new_hi, mid)
    return o, n, a, b


def new_averages(n_new, new_index, lengths, integrals, reference):
    """Averages over new cells written as reference + mean deviation.

    Writing u_N as a correction to the value of one overlapping old cell
    makes constant data reproduce exactly, not just up to rounding.
    """
    m = integrals.shape[1]
    present, first = np.unique(new_index, return_index=True)
    if len(present) != n_new:
        raise RemapError("a new cell has no overlapping old cell")
    ref = reference[first]
    dev = np.zeros((n_new, m))
    tot = np.zeros(n_new)
    np.add.at(dev, new_index, integrals - lengths[:, None] * ref[new_index])
    np.add.at(tot, new_index, lengths)
    return ref + dev / tot[:, None]


def remap_1d(old_lo, old_hi, u_old, new_lo, new_hi, reconstruction="constant"):
    """Conservative remap of averages ``u_old`` (n, m) onto new cells.

    u_N = (1/|N|) sum_O int_{O cap N} v, with v piecewise constant or
    piecewise linear with minmod-limited slopes.
    """
    u_old = np.asarray(u_old, dtype=float)
    if u_old.ndim == 1:
        u_old = u_old[:, None]
    o, n, a, b = overlaps(old_lo, old_hi, new_lo, new_hi)
    s = slopes(old_lo, old_hi, u_old, reconstruction)
    integ = piece_integrals(old_lo, old_hi, u_old, s, o, a, b)
    vals = new_averages(len(new_lo), n, b - a, integ, u_old[o])
    # overlaps must partition every old cell
    tot = np.zeros(len(old_lo))
    np.add.at(tot, o, b - a)
    width = np.asarray(old_hi) - np.asarray(old_lo)
    if np.any(np.abs(tot - width) > 1e-12 * np.maximum(1.0, width)):
        raise RemapError("overlap measures do not partition the old cells")
    return RemapResult(vals, o, n, a, b, integ)
