import math
import time

import numpy as np
import pytest

from stlw.grid import (build_local_timestep_grid, build_moving_vertex_grid, build_perturbed_grid,
                       build_staggered_grid, build_uniform_grid, insert_remap_layer)
from stlw.gridio import GridFormatError, dump_grid, load_grid

BUILDERS = {
    "uniform": lambda: build_uniform_grid(0.1, 0.5, 0.5, 0.0, 1.0),
    "staggered": lambda: build_staggered_grid(0.1, 0.01, 0.03, 0.0, 1.0),
    "lts": lambda: build_local_timestep_grid(0.1, 0.5, (0.4, 0.6), 2, 0.5, 0.0, 1.0),
    "moving": lambda: build_moving_vertex_grid(0.1, 0.5, 0.5, 0.0, 1.0,
                                               lambda t, x: 0.1 * math.sin(math.pi * x)),
    "perturbed": lambda: build_perturbed_grid(0.1, 0.5, 0.0, 1.0, seed=1),
    "remap": lambda: insert_remap_layer(build_uniform_grid(0.1, 0.5, 0.5, 0.0, 1.0), 0.25,
                                        [0.0, 0.3, 0.55, 1.0]),
}


@pytest.mark.parametrize("name", sorted(BUILDERS))
def test_round_trip_bit_identical(name, tmp_path):
    g = BUILDERS[name]()
    p = tmp_path / "g.stg"
    dump_grid(g, p)
    h = load_grid(p)
    for attr in ("face_kind", "face_left", "face_right", "face_p0", "face_p1", "face_normal",
                 "face_measure", "volume", "centroid", "cell_layer"):
        assert np.array_equal(getattr(g, attr), getattr(h, attr)), attr
    assert h.family == g.family
    dump_grid(h, tmp_path / "again.stg")
    assert (tmp_path / "again.stg").read_bytes() == p.read_bytes()


def test_truncated_file_names_line(tmp_path):
    p = tmp_path / "g.stg"
    dump_grid(BUILDERS["uniform"](), p)
    lines = p.read_text().splitlines()
    p.write_text("\n".join(lines[:-3]) + "\n")
    with pytest.raises(GridFormatError, match=rf"line {len(lines) - 2}"):
        load_grid(p)


def test_bad_record_names_line(tmp_path):
    p = tmp_path / "g.stg"
    dump_grid(BUILDERS["uniform"](), p)
    lines = p.read_text().splitlines()
    k = next(i for i, s in enumerate(lines) if s.startswith("F "))
    lines[k] = lines[k].replace("F ", "F x", 1)
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(GridFormatError, match=rf"line {k + 1}"):
        load_grid(p)


def test_bad_header(tmp_path):
    p = tmp_path / "g.stg"
    p.write_text("NOTAGRID\n")
    with pytest.raises(GridFormatError, match="line 1"):
        load_grid(p)


def test_thousand_cell_moving_grid_loads_fast(tmp_path):
    g = build_moving_vertex_grid(0.04, 0.5, 0.8, 0.0, 1.0, lambda t, x: 0.1 * math.sin(math.pi * x))
    assert g.ncells == 1000
    p = tmp_path / "g.stg"
    dump_grid(g, p)
    t0 = time.perf_counter()
    load_grid(p)
    assert time.perf_counter() - t0 < 1.0
