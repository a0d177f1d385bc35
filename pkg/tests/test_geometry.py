import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jumplab.geometry import (Configuration, TorusDomain, ball_volume,
                              min_image, shell_volume)


def test_min_image_wraps_across_boundary():
    dom = TorusDomain(1, 10.0)
    assert min_image([9.5], [0.5], dom) == pytest.approx(-1.0, abs=0)


def test_min_image_identity():
    dom = TorusDomain(2, 7.0)
    assert np.all(min_image([1.0, 2.0], [1.0, 2.0], dom) == 0.0)


def test_min_image_componentwise_wrap():
    # hand computation: 3.9-0.1=3.8 -> -0.2, 0.1-3.9=-3.8 -> 0.2 (L=4)
    dom = TorusDomain(2, 4.0)
    got = min_image([3.9, 0.1], [0.1, 3.9], dom)
    assert got == pytest.approx([-0.2, 0.2], abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 3),
       st.floats(0.5, 50.0, allow_nan=False),
       st.lists(st.floats(-100, 100, allow_nan=False), min_size=3,
                max_size=6))
def test_min_image_range_and_antisymmetry(d, L, coords):
    dom = TorusDomain(d, L)
    p = dom.wrap(np.array(coords[:d]))
    q = dom.wrap(np.array(coords[-d:]))
    m = min_image(p, q, dom)
    assert np.all(m >= -L / 2 - 1e-12) and np.all(m < L / 2 + 1e-12)
    assert np.linalg.norm(m) <= L * np.sqrt(d) / 2 + 1e-9
    # radius symmetric under argument exchange
    m2 = min_image(q, p, dom)
    assert np.linalg.norm(m) == pytest.approx(np.linalg.norm(m2), abs=1e-12)


def test_wrap_into_box():
    dom = TorusDomain(1, 5.0)
    assert dom.wrap(np.array([-0.5])) == pytest.approx(4.5)
    assert dom.wrap(np.array([5.0])) == pytest.approx(0.0)


def test_domain_validation():
    with pytest.raises(ValueError):
        TorusDomain(4, 1.0)
    with pytest.raises(ValueError):
        TorusDomain(1, -1.0)


def test_volumes():
    assert ball_volume(1, 2.0) == 4.0
    assert ball_volume(2, 1.0) == pytest.approx(np.pi)
    assert ball_volume(3, 1.0) == pytest.approx(4 * np.pi / 3)
    assert shell_volume(1, 1.0, 2.0) == 2.0


def test_configuration_invariants():
    dom = TorusDomain(1, 10.0)
    cfg = Configuration(dom, [[1.0], [2.0]])
    assert len(cfg) == 2
    assert list(cfg.ids) == [0, 1]
    with pytest.raises(ValueError):
        Configuration(dom, [[11.0]])
    with pytest.raises(ValueError):
        Configuration(dom, [[1.0], [2.0]], ids=[3, 3])
    assert cfg.index_of(1) == 1
    with pytest.raises(KeyError):
        cfg.index_of(9)


def test_empty_configuration():
    dom = TorusDomain(2, 3.0)
    cfg = Configuration(dom, np.empty((0, 2)))
    assert len(cfg) == 0
