"""Elementary functionals on finite configurations.

Implements the product functional e(f; eta), the subset-sum transform
turning functions of finite clusters into observables of whole
configurations, and truncated configuration-space integrals (the sum
over orders of 1/n! times an n-fold volume integral).
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FiniteSupportFunction:
    """Function of finite clusters with bounded support.

    ``evaluators`` maps the order n to a symmetric callable taking an
    (n, d) array of positions; ``value_empty`` is the value on the empty
    cluster.  The function vanishes whenever any argument leaves the
    axis-aligned ``support_box`` (lo, hi) or the order exceeds
    ``max_order``; the box and order cutoffs are enforced here, so
    evaluators only need to be correct inside the box.
    """

    evaluators: dict
    support_lo: np.ndarray
    support_hi: np.ndarray
    max_order: int
    value_empty: float = 0.0

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.support_lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.support_hi, dtype=float))
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise ValueError("support box must have positive extent")
        object.__setattr__(self, "support_lo", lo)
        object.__setattr__(self, "support_hi", hi)
        if self.max_order < 0:
            raise ValueError("max_order must be nonnegative")

    @property
    def dimension(self):
        return len(self.support_lo)

    def in_box(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return bool(
            np.all(points >= self.support_lo) and np.all(points <= self.support_hi)
        )

    def __call__(self, points):
        """Evaluate on a cluster given as an (n, d) array (n = 0 allowed)."""
        points = np.asarray(points, dtype=float)
        if points.size == 0:
            return self.value_empty
        points = np.atleast_2d(points)
        n = len(points)
        if n > self.max_order or n not in self.evaluators:
            return 0.0
        if not self.in_box(points):
            return 0.0
        return float(self.evaluators[n](points))


def e_product(f, eta):
    """Product of f over the points of the configuration eta.

    Empty configuration gives 1; multiplicative over disjoint unions.
    """
    if len(eta) == 0:
        return 1.0
    total = 1.0
    for p in eta.points:
        total *= float(f(p))
    return total


def k_transform(G, gamma):
    """Sum of G over all nonempty subclusters of the finite configuration.

    Only subsets of size <= G.max_order contribute.  For |G| <= 1 the
    result is bounded by (1 + m)^N(G) with m the number of points of
    gamma inside the support box.
    """
    n_pts = len(gamma)
    total = 0.0
    # points outside the support box kill every subset containing them
    inside = [
        i for i in range(n_pts)
        if G.in_box(gamma.points[i:i + 1])
    ]
    max_n = min(G.max_order, len(inside))
    for n in range(1, max_n + 1):
        for comb in itertools.combinations(inside, n):
            total += G(gamma.points[list(comb)])
    return total


def k_transform_bound(G, gamma):
    """The cluster-count bound (1 + |gamma inside box|)^max_order."""
    m = sum(1 for i in range(len(gamma)) if G.in_box(gamma.points[i:i + 1]))
    return (1.0 + m) ** G.max_order


@dataclass(frozen=True)
class QuadratureGrid:
    """Cell-centered product grid used by the truncated integrals."""

    lo: np.ndarray
    hi: np.ndarray
    cells_per_axis: int

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if self.cells_per_axis < 1:
            raise ValueError("need at least one cell per axis")

    @property
    def dimension(self):
        return len(self.lo)

    @property
    def cell_volume(self):
        widths = (self.hi - self.lo) / self.cells_per_axis
        return float(np.prod(widths))

    def nodes(self):
        axes = [
            self.lo[k]
            + (np.arange(self.cells_per_axis) + 0.5)
            * (self.hi[k] - self.lo[k])
            / self.cells_per_axis
            for k in range(self.dimension)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def covers(self, lo, hi):
        return bool(np.all(self.lo <= lo + 1e-12) and np.all(self.hi >= hi - 1e-12))


def lp_integral_truncated(G, order_cap, grid):
    """Truncated configuration-space integral of G.

    Returns G(empty) plus the sum over n = 1..order_cap of 1/n! times
    the n-fold quadrature of the order-n component.  Exact (up to
    quadrature error) whenever order_cap >= G.max_order, because the
    series terminates.  Raises ValueError when the quadrature grid does
    not cover the support box.
    """
    if order_cap < 0:
        raise ValueError("order_cap must be nonnegative")
    if not grid.covers(G.support_lo, G.support_hi):
        raise ValueError("quadrature grid does not cover the support box")
    nodes = grid.nodes()
    m = len(nodes)
    hd = grid.cell_volume
    total = G.value_empty
    for n in range(1, min(order_cap, G.max_order) + 1):
        level = 0.0
        if n == 1:
            for i in range(m):
                level += G(nodes[i:i + 1])
        else:
            for idx in itertools.product(range(m), repeat=n):
                level += G(nodes[list(idx)])
        total += level * hd ** n / math.factorial(n)
    return total


def indicator_function(lo, hi, orders, value_empty=0.0):
    """Indicator of the box on every order in ``orders`` (test helper)."""
    evaluators = {n: (lambda pts: 1.0) for n in orders}
    return FiniteSupportFunction(
        evaluators=evaluators,
        support_lo=np.atleast_1d(np.asarray(lo, dtype=float)),
        support_hi=np.atleast_1d(np.asarray(hi, dtype=float)),
        max_order=max(orders) if orders else 0,
        value_empty=value_empty,
    )
