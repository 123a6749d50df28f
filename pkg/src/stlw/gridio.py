"""Plain-text dump and load of space-time grids.

Format (UTF-8, one record per line)::

    STGRID 1 <ncells> <nfaces> <T> <x_lo> <x_hi> <h>
    C <id> <layer> <nverts> t1 x1 t2 x2 ...
    F <id> <I|B> <left|-1> <right|-1> ta xa tb xb

Floats are written as shortest round-trip decimals. Lines starting with
``#`` carry optional metadata (``# family NAME``, ``# remap_time T``,
``# meta KEY VALUE``); they are ignored by readers that do not know them.
"""

import ast

import numpy as np

from .grid import BOUNDARY, INITIAL, INTERIOR, OUTER, REMAP, from_tables

MAGIC = "STGRID"
VERSION = 1


class GridFormatError(ValueError):
    """Malformed grid file; the message names the offending line."""


def _f(v):
    return repr(float(v))


def dump_grid(grid, path):
    """Write ``grid`` to ``path``."""
    lines = [f"{MAGIC} {VERSION} {grid.ncells} {grid.nfaces} {_f(grid.T)} {_f(grid.x_lo)} "
             f"{_f(grid.x_hi)} {_f(grid.h)}",
             f"# family {grid.family}"]
    remap = grid.face_kind == REMAP
    if remap.any():
        for t in np.unique(grid.face_p0[remap, 0]):
            lines.append(f"# remap_time {_f(t)}")
    for k in sorted(grid.meta):
        v = grid.meta[k]
        if isinstance(v, (bool, int, float, str, np.integer, np.floating)):
            v = v.item() if isinstance(v, np.generic) else v
            lines.append(f"# meta {k} {v!r}")
    for c in range(grid.ncells):
        V = grid.vertices[c]
        coords = " ".join(_f(z) for z in V.ravel())
        lines.append(f"C {c} {int(grid.cell_layer[c])} {len(V)} {coords}")
    for f in range(grid.nfaces):
        kind = "I" if grid.face_kind[f] in (INTERIOR, REMAP) else "B"
        a, b = grid.face_p0[f], grid.face_p1[f]
        lines.append(f"F {f} {kind} {int(grid.face_left[f])} {int(grid.face_right[f])} "
                     f"{_f(a[0])} {_f(a[1])} {_f(b[0])} {_f(b[1])}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _num(tok, cast, lineno, what):
    try:
        return cast(tok)
    except ValueError:
        raise GridFormatError(f"line {lineno}: bad {what} {tok!r}") from None


def load_grid(path):
    """Read a grid written by ``dump_grid``."""
    with open(path, encoding="utf-8") as fh:
        raw = fh.read().split("\n")
    if raw and raw[-1] == "":
        raw.pop()
    if not raw:
        raise GridFormatError("line 1: empty file")
    head = raw[0].split()
    if len(head) != 8 or head[0] != MAGIC:
        raise GridFormatError(f"line 1: expected '{MAGIC} 1 ncells nfaces T x_lo x_hi h'")
    if _num(head[1], int, 1, "version") != VERSION:
        raise GridFormatError(f"line 1: unsupported version {head[1]}")
    ncells = _num(head[2], int, 1, "cell count")
    nfaces = _num(head[3], int, 1, "face count")
    T, x_lo, x_hi, h = (_num(t, float, 1, "number") for t in head[4:])

    family, meta, remap_times = "generic", {}, []
    polys, layer_of = [], []
    fa, fb, fl, fr, fk = [], [], [], [], []
    for lineno, line in enumerate(raw[1:], start=2):
        tok = line.split()
        if not tok:
            raise GridFormatError(f"line {lineno}: blank line")
        if tok[0] == "#":
            if len(tok) >= 3 and tok[1] == "family":
                family = tok[2]
            elif len(tok) == 3 and tok[1] == "remap_time":
                remap_times.append(_num(tok[2], float, lineno, "time"))
            elif len(tok) >= 4 and tok[1] == "meta":
                try:
                    meta[tok[2]] = ast.literal_eval(line.split(None, 3)[3])
                except (ValueError, SyntaxError):
                    raise GridFormatError(f"line {lineno}: bad meta value") from None
            continue
        if tok[0] == "C":
            if len(tok) < 4:
                raise GridFormatError(f"line {lineno}: truncated cell record")
            cid = _num(tok[1], int, lineno, "cell id")
            if cid != len(polys):
                raise GridFormatError(f"line {lineno}: expected cell id {len(polys)}, got {cid}")
            nv = _num(tok[3], int, lineno, "vertex count")
            if nv < 3 or len(tok) != 4 + 2 * nv:
                raise GridFormatError(f"line {lineno}: cell {cid} needs {nv} vertex pairs, "
                                      f"got {(len(tok) - 4) / 2:g}")
            layer_of.append(_num(tok[2], int, lineno, "layer"))
            polys.append(np.array([_num(t, float, lineno, "coordinate") for t in tok[4:]])
                         .reshape(nv, 2))
        elif tok[0] == "F":
            if len(tok) != 9:
                raise GridFormatError(f"line {lineno}: face record needs 9 fields, got {len(tok)}")
            fid = _num(tok[1], int, lineno, "face id")
            if fid != len(fa):
                raise GridFormatError(f"line {lineno}: expected face id {len(fa)}, got {fid}")
            if tok[2] not in ("I", "B"):
                raise GridFormatError(f"line {lineno}: face kind must be I or B, got {tok[2]!r}")
            left = _num(tok[3], int, lineno, "left cell")
            right = _num(tok[4], int, lineno, "right cell")
            for c in (left, right):
                if c != BOUNDARY and not 0 <= c < ncells:
                    raise GridFormatError(f"line {lineno}: cell index {c} out of range")
            ta, xa, tb, xb = (_num(t, float, lineno, "coordinate") for t in tok[5:])
            if tok[2] == "I":
                if left < 0 or right < 0:
                    raise GridFormatError(f"line {lineno}: interior face needs two cells")
                tol = 1e-12 * max(1.0, T)
                on_remap = ta == tb and any(abs(ta - t) <= tol for t in remap_times)
                fk.append(REMAP if on_remap else INTERIOR)
            elif left == BOUNDARY and right >= 0:
                fk.append(INITIAL)
            elif right == BOUNDARY and left >= 0:
                fk.append(OUTER)
            else:
                raise GridFormatError(f"line {lineno}: boundary face needs exactly one cell")
            fa.append((ta, xa))
            fb.append((tb, xb))
            fl.append(left)
            fr.append(right)
        else:
            raise GridFormatError(f"line {lineno}: unknown record type {tok[0]!r}")
    last = len(raw) + 1
    if len(polys) != ncells:
        raise GridFormatError(f"line {last}: file ends after {len(polys)} of {ncells} cells")
    if len(fa) != nfaces:
        raise GridFormatError(f"line {last}: file ends after {len(fa)} of {nfaces} faces")
    return from_tables(polys, layer_of, fa, fb, fl, fr, fk, (T, x_lo, x_hi), h, family, meta)


__all__ = ["GridFormatError", "dump_grid", "load_grid"]
