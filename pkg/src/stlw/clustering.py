"""Approximation of a Cartesian cube lattice by clusters of grid cells."""

from dataclasses import dataclass
import math

import numpy as np

from .grid import GridError, INITIAL, OUTER, grid_metrics


@dataclass
class CubeApproximation:
    """Cells grouped by cube index k = (k_t, k_x); faces of cluster boundaries.

    Face lists hold ``(face_id, sign)`` pairs, where ``sign`` orients the
    face outward from the cluster (+1 if the cluster cell is the face's
    left cell).
    """

    H: float
    rho: float
    clusters: dict
    boundary_faces: dict
    side_faces: dict
    corner_faces: dict
    cell_cube: dict
    grid: object


def _cube_indices(centroids, H):
    q = centroids / H
    k = np.floor(q)
    # a centroid exactly on a cube boundary goes to the smaller index
    k -= (k > 0) & (np.abs(q - k) < 1e-12)
    k[:, 0] = np.maximum(k[:, 0], 0)
    return k.astype(int)


def cube_clustering(grid, H):
    """Assign every cell to the cube containing its centroid.

    Raises GridError unless H > 2 h_max.
    """
    h_max = grid_metrics(grid).h_max
    if not H > 2 * h_max:
        raise GridError(f"cube side H={H} must exceed 2*h_max={2 * h_max:g}")
    kk = _cube_indices(np.asarray(grid.centroid), H)
    cell_cube = {i: (int(a), int(b)) for i, (a, b) in enumerate(kk)}
    clusters = {}
    for i, k in cell_cube.items():
        clusters.setdefault(k, set()).add(i)

    boundary, sides, corners = {}, {}, {}
    for f in range(grid.nfaces):
        kind = grid.face_kind[f]
        if kind == OUTER:
            continue
        if kind == INITIAL:
            c = grid.face_right[f]
            k = cell_cube[c]
            # C -> boundary, oriented outward from the cluster
            boundary.setdefault(k, []).append((f, -1.0))
            sides.setdefault((k, 0, -1), []).append((f, -1.0))
            continue
        L, R = grid.face_left[f], grid.face_right[f]
        kl, kr = cell_cube[L], cell_cube[R]
        if kl == kr:
            continue
        for k, other, sign in ((kl, kr, 1.0), (kr, kl, -1.0)):
            boundary.setdefault(k, []).append((f, sign))
            diff = (other[0] - k[0], other[1] - k[1])
            if sum(abs(v) for v in diff) == 1:
                i = 0 if diff[0] else 1
                s = diff[i]
                sides.setdefault((k, i, s), []).append((f, sign))
            else:
                corners.setdefault(k, []).append((f, sign))
    rho = h_max / H
    return CubeApproximation(H, rho, clusters, boundary, sides, corners, cell_cube, grid)


def clustering_diagnostics(clustering):
    """(corner_fraction, max_normal_defect) of a cube clustering.

    The normal defect compares the summed face normals of each cluster side
    with the exact cube side normal, scaled by H. Only cubes whose full
    neighbourhood lies inside the slab are used for the defect.
    """
    g = clustering.grid
    H = clustering.H
    S = g.face_measure
    total = sum(S[f] for faces in clustering.boundary_faces.values() for f, _ in faces)
    corner = sum(S[f] for faces in clustering.corner_faces.values() for f, _ in faces)
    corner_fraction = corner / total if total > 0 else 0.0

    kt_max = math.floor(g.T / H - 1e-12)
    kx_min = math.floor(g.x_lo / H + 1e-12)
    kx_max = math.floor(g.x_hi / H - 1e-12)
    worst = 0.0
    for k in clustering.clusters:
        if not (k[0] < kt_max and kx_min < k[1] < kx_max):
            continue
        for i in (0, 1):
            for s in (-1, 1):
                faces = clustering.side_faces.get((k, i, s), [])
                v = np.zeros(2)
                for f, sign in faces:
                    v += sign * S[f] * g.face_normal[f]
                exact = np.zeros(2)
                exact[i] = s * H
                worst = max(worst, float(np.linalg.norm(v - exact)) / H)
    return corner_fraction, worst


def check_partition(clustering):
    """True when every cell sits in exactly one cluster that it intersects."""
    g = clustering.grid
    H = clustering.H
    seen = sorted(c for cells in clustering.clusters.values() for c in cells)
    if seen != list(range(g.ncells)):
        return False
    for k, cells in clustering.clusters.items():
        lo = np.array([k[0] * H, k[1] * H])
        hi = lo + H
        for c in cells:
            v = g.vertices[c]
            if np.any(v.max(axis=0) < lo - 1e-12) or np.any(v.min(axis=0) > hi + 1e-12):
                return False
    return True


__all__ = ["CubeApproximation", "cube_clustering", "clustering_diagnostics",
           "check_partition"]
