import numpy as np
import pytest

from stlw.grid import build_uniform_grid


@pytest.fixture(scope="session")
def small_uniform():
    return build_uniform_grid(0.1, 0.5, 0.5, -1.0, 2.0)


def assert_close(a, b, tol):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    assert np.all(np.abs(a - b) <= tol), f"max deviation {np.abs(a - b).max():g} > {tol:g}"
