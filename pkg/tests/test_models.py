import numpy as np
import pytest

from stlw.models import (ModelError, advection, burgers, check_entropy_compatibility, kruzkov_pair,
                         model_from_name, selfsimilar, square_entropy, trivial)


def _z(n):
    return np.zeros(n)


def test_burgers_flux_and_speed():
    m = burgers()
    u = np.array([[-1.0], [0.5]])
    assert m.flux(u, _z(2), _z(2))[:, 0].tolist() == [0.5, 0.125]
    assert m.max_speed() == 1.0


def test_admissible_box():
    m = burgers(0.0, 1.0)
    assert m.admissible([[0.5], [1.5], [np.nan]]).tolist() == [True, False, False]


def test_selfsimilar_flux_and_source():
    m = selfsimilar(burgers(), d=2)
    u = np.array([[1.0]])
    assert m.flux(u, _z(1), np.array([0.5]))[0, 0] == pytest.approx(0.0)
    assert m.p(u, _z(1), _z(1))[0, 0] == -2.0
    assert not m.homogeneous
    with pytest.raises(ModelError):
        selfsimilar(burgers(), d=0)


@pytest.mark.parametrize("a", [-0.5, 0.0, 0.3])
def test_kruzkov_pair_compatible(a):
    assert check_entropy_compatibility(kruzkov_pair(burgers(), a), burgers()) <= 1e-6


def test_kruzkov_flux_subtracts_fa():
    pair = kruzkov_pair(burgers(), 0.5)
    u = np.array([[0.5]])
    assert pair.eta1(u, _z(1), _z(1))[0] == 0.0


def test_square_entropy_compatible():
    for m in (burgers(), advection(2.0), trivial()):
        assert check_entropy_compatibility(square_entropy(m), m) <= 1e-6


def test_model_from_name():
    assert model_from_name("burgers", lower=0, upper=1).upper == (1.0,)
    assert model_from_name("selfsimilar", d=1).name.startswith("selfsimilar")
    with pytest.raises(ModelError):
        model_from_name("euler")
