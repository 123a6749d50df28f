import pytest

from stlw.clustering import check_partition, clustering_diagnostics, cube_clustering
from stlw.grid import GridError, build_perturbed_grid, build_uniform_grid


def test_uniform_cubes_are_exact():
    g = build_uniform_grid(0.1, 1.0, 1.0, 0.0, 1.0)
    c = cube_clustering(g, 1.0)
    assert len(c.clusters) == 1
    assert len(next(iter(c.clusters.values()))) == 100
    assert check_partition(c)


def test_exact_multiple_has_no_corner_faces():
    g = build_uniform_grid(0.1, 1.0, 2.0, 0.0, 2.0)
    c = cube_clustering(g, 0.5)
    corner, defect = clustering_diagnostics(c)
    assert corner == 0.0
    assert defect <= 1e-12


def test_boundary_faces_pair_up():
    g = build_perturbed_grid(0.05, 1.0, 0.0, 1.0, seed=2)
    c = cube_clustering(g, 0.25)
    count = {}
    for k, faces in c.boundary_faces.items():
        for f, sign in faces:
            count.setdefault(f, []).append(sign)
    for f, signs in count.items():
        if g.face_left[f] >= 0 and g.face_right[f] >= 0:
            assert sorted(signs) == [-1.0, 1.0]


def test_perturbed_partition():
    g = build_perturbed_grid(0.02, 0.4, 0.0, 0.4, seed=0)
    c = cube_clustering(g, 0.2)
    assert all(len(v) > 0 for v in c.clusters.values())
    assert check_partition(c)


def test_rejects_small_cubes():
    g = build_uniform_grid(0.1, 1.0, 1.0, 0.0, 1.0)
    with pytest.raises(GridError):
        cube_clustering(g, 0.2)
