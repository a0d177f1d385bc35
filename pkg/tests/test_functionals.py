import numpy as np
import pytest

from jumplab.functionals import (FiniteSupportFunction, QuadratureGrid,
                                 e_product, indicator_function, k_transform,
                                 k_transform_bound, lp_integral_truncated)
from jumplab.geometry import Configuration, TorusDomain


@pytest.fixture
def dom():
    return TorusDomain(1, 10.0)


def test_e_product_empty_is_one(dom):
    eta = Configuration(dom, np.empty((0, 1)))
    assert e_product(lambda p: 7.0, eta) == 1.0


def test_e_product_two_points(dom):
    eta = Configuration(dom, [[1.0], [2.0]])
    assert e_product(lambda p: float(p[0]), eta) == pytest.approx(2.0)


def test_e_product_vanishing_factor(dom):
    # with no repulsion the expansion weight exp(-phi) - 1 vanishes,
    # so the product over any nonempty configuration is zero
    eta = Configuration(dom, [[1.0], [2.0]])
    t_y = lambda p: np.exp(-0.0) - 1.0
    assert e_product(t_y, eta) == 0.0


def test_e_product_multiplicative(dom):
    f = lambda p: 0.5 + float(p[0]) / 10.0
    a = Configuration(dom, [[1.0], [2.0]])
    b = Configuration(dom, [[5.0]])
    ab = Configuration(dom, [[1.0], [2.0], [5.0]])
    assert e_product(f, ab) == pytest.approx(
        e_product(f, a) * e_product(f, b))


def test_k_transform_singletons(dom):
    g = FiniteSupportFunction(
        evaluators={1: lambda pts: float(pts[0, 0])},
        support_lo=[0.0], support_hi=[10.0], max_order=1)
    gamma = Configuration(dom, [[1.0], [2.0], [3.5]])
    assert k_transform(g, gamma) == pytest.approx(6.5)


def test_k_transform_empty_configuration(dom):
    g = indicator_function([0.0], [10.0], orders=[1, 2])
    gamma = Configuration(dom, np.empty((0, 1)))
    assert k_transform(g, gamma) == 0.0


def test_k_transform_pair_indicator_counts_pairs(dom):
    g = FiniteSupportFunction(
        evaluators={2: lambda pts: 1.0},
        support_lo=[2.0], support_hi=[6.0], max_order=2)
    # m = 4 points inside the box -> m(m-1)/2 = 6 pairs
    gamma = Configuration(dom, [[2.5], [3.0], [4.0], [5.5], [8.0]])
    assert k_transform(g, gamma) == pytest.approx(6.0)


def test_k_transform_bound(dom, rng):
    for _ in range(200):
        n_max = int(rng.integers(1, 4))
        coeff = float(rng.uniform(-1, 1))
        g = FiniteSupportFunction(
            evaluators={n: (lambda pts, c=coeff: c)
                        for n in range(1, n_max + 1)},
            support_lo=[2.0], support_hi=[7.0], max_order=n_max)
        m = int(rng.integers(0, 8))
        gamma = Configuration(dom, rng.random((m, 1)) * 10.0)
        assert abs(k_transform(g, gamma)) <= k_transform_bound(g, gamma)


def test_lp_integral_empty_component_only():
    g = FiniteSupportFunction(evaluators={}, support_lo=[0.0],
                              support_hi=[1.0], max_order=0,
                              value_empty=1.0)
    grid = QuadratureGrid([0.0], [1.0], 8)
    assert lp_integral_truncated(g, 3, grid) == 1.0


def test_lp_integral_indicator_order1():
    # indicator of a length-2 box integrates to 2
    g = indicator_function([0.0], [2.0], orders=[1])
    grid = QuadratureGrid([0.0], [2.0], 8)
    assert lp_integral_truncated(g, 1, grid) == pytest.approx(2.0)


def test_lp_integral_indicator_order2_half_factor():
    # indicator of a unit box at order 2: 1/2! times 1 = 0.5
    g = indicator_function([0.0], [1.0], orders=[2])
    grid = QuadratureGrid([0.0], [1.0], 6)
    assert lp_integral_truncated(g, 2, grid) == pytest.approx(0.5)


def test_lp_integral_terminating_series():
    g = indicator_function([0.0], [1.0], orders=[1, 2], value_empty=1.0)
    grid = QuadratureGrid([0.0], [1.0], 6)
    # series terminates at the max order: larger caps change nothing
    v2 = lp_integral_truncated(g, 2, grid)
    v5 = lp_integral_truncated(g, 5, grid)
    assert v2 == v5 == pytest.approx(1.0 + 1.0 + 0.5)


def test_lp_integral_grid_must_cover_support():
    g = indicator_function([0.0], [2.0], orders=[1])
    small = QuadratureGrid([0.0], [1.0], 8)
    with pytest.raises(ValueError):
        lp_integral_truncated(g, 1, small)


def test_support_box_enforced(dom):
    g = indicator_function([2.0], [4.0], orders=[1])
    assert g(np.array([[3.0]])) == 1.0
    assert g(np.array([[5.0]])) == 0.0
    assert g(np.array([[3.0], [3.5]])) == 0.0  # beyond max order
