"""Brute-force reference evaluation of the correlation operators.

Written as literal sums with explicit loops, independently of the
vectorized implementations in :mod:`jumplab.hierarchy`, to serve as the
oracle in agreement tests: for every removable cluster point the gain
term scans all source sites weighted by the jump kernel, the loss term
scans all target sites, and the crowding correction enumerates
correction-site tuples directly.  Only meant for small lattices.
"""

import numpy as np


def _tau(lk, a, b):
    return float(lk.tau_sep[lk.grid.sep_matrix[a, b]])


def _t(lk, a, b):
    return float(lk.t_sep[lk.grid.sep_matrix[a, b]])


def _a_weight(lk, a, b):
    return float(lk.a_sep[lk.grid.sep_matrix[a, b]]) * lk.grid.cell_volume


def reference_value(field, sites):
    """Field value on a site tuple with the closure rule applied
    (excess points beyond n_max factor through the density, or vanish)."""
    sites = tuple(int(s) for s in sites)
    n = len(sites)
    if n == 0:
        return 1.0
    n_max = field.closure.n_max
    if n > n_max:
        if field.closure.kind == "zero-tail":
            return 0.0
        val = reference_value(field, sites[:n_max])
        for z in sites[n_max:]:
            if field.mode == "ti":
                val *= float(field.k1)
            else:
                val *= float(field.k1[z])
        return val
    if field.mode == "ti":
        if n == 1:
            return float(field.k1)
        return float(field.k2[field.grid.sep_matrix[sites[0], sites[1]]])
    if n == 1:
        return float(field.k1[sites[0]])
    if n == 2:
        return float(field.k2[sites[0], sites[1]])
    return float(field.k3[sites[0], sites[1], sites[2]])


def reference_qy(field, y, eta):
    """Crowding-corrected value by direct enumeration of correction sites."""
    lk = field.kernels
    s = lk.grid.n_sites
    hd = lk.grid.cell_volume
    eta = tuple(int(e) for e in eta)
    y = int(y)
    total = reference_value(field, eta)
    if field.qy_order >= 1:
        for z in range(s):
            tz = _t(lk, y, z)
            if tz != 0.0:
                total += hd * tz * reference_value(field, eta + (z,))
    if field.qy_order >= 2:
        acc = 0.0
        for z1 in range(s):
            t1 = _t(lk, y, z1)
            if t1 == 0.0:
                continue
            for z2 in range(s):
                t2 = _t(lk, y, z2)
                if t2 != 0.0:
                    acc += t1 * t2 * reference_value(field, eta + (z1, z2))
        total += 0.5 * hd * hd * acc
    return total


def reference_ldelta_at(field, eta):
    """Interacting-operator derivative at one cluster, by literal sums."""
    lk = field.kernels
    s = lk.grid.n_sites
    eta = tuple(int(e) for e in eta)
    exclude_self = lk.kspec.exclude_self_term

    gain = 0.0
    for j in range(len(eta)):
        y = eta[j]
        spectators = eta[:j] + eta[j + 1:]
        for x in range(s):
            w = _a_weight(lk, x, y)
            if w == 0.0:
                continue
            ep = 1.0
            for z in spectators:
                ep *= _tau(lk, y, z)
            if not exclude_self:
                ep *= _tau(lk, y, x)
            gain += w * ep * reference_qy(field, y, spectators + (x,))

    loss = 0.0
    for j in range(len(eta)):
        x = eta[j]
        for y in range(s):
            w = _a_weight(lk, x, y)
            if w == 0.0:
                continue
            ep = 1.0
            for idx, z in enumerate(eta):
                if exclude_self and idx == j:
                    continue
                ep *= _tau(lk, y, z)
            loss += w * ep * reference_qy(field, y, eta)
    return gain - loss


def reference_lbar_at(field, eta):
    """Free comparison operator at one cluster: gain term only, phi = 0."""
    lk = field.kernels
    s = lk.grid.n_sites
    eta = tuple(int(e) for e in eta)
    gain = 0.0
    for j in range(len(eta)):
        y = eta[j]
        spectators = eta[:j] + eta[j + 1:]
        for x in range(s):
            w = _a_weight(lk, x, y)
            if w != 0.0:
                gain += w * reference_value(field, spectators + (x,))
    return gain


def reference_delta(field, free=False):
    """Derivative of every stored entry, for agreement tests.

    Returns (dk1, dk2[, dk3]) in the field's own representation.
    """
    at = reference_lbar_at if free else reference_ldelta_at
    grid = field.grid
    s = grid.n_sites
    if field.mode == "ti":
        dk1 = at(field, (0,))
        dk2 = np.array([at(field, (0, r)) for r in range(s)])
        return dk1, dk2, None
    dk1 = np.array([at(field, (u,)) for u in range(s)])
    dk2 = np.array([[at(field, (u, v)) for v in range(s)] for u in range(s)])
    dk3 = None
    if field.closure.n_max == 3:
        dk3 = np.array(
            [[[at(field, (u, v, w)) for w in range(s)]
              for v in range(s)] for u in range(s)])
    return dk1, dk2, dk3
