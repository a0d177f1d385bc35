"""Exact master equation on the fixed-N sector of a small lattice.

The state space is the set of all N-site subsets; a particle at an
occupied site jumps to a vacant site with the lattice jump rate dressed
by the repulsion of the whole current configuration (moves onto
occupied sites are excluded so the sector is preserved; in the
continuum such collisions have probability zero).  The resulting linear
ODE is solved essentially exactly and serves as the cross-validation
oracle for both the stochastic simulator and the truncated correlation
hierarchy.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import null_space
from scipy.sparse.linalg import expm_multiply

MAX_SECTOR = 100_000


@dataclass
class Sector:
    """Enumerated N-subset state space with its generator matrix."""

    kernels: object
    n_particles: int
    states: list = field(init=False)
    index: dict = field(init=False)
    generator: sp.csr_matrix = field(init=False)

    def __post_init__(self):
        s = self.kernels.grid.n_sites
        n = self.n_particles
        if n < 1:
            raise ValueError("need at least one particle")
        size = math.comb(s, n)
        if size > MAX_SECTOR:
            raise ValueError(
                f"sector has {size} states, beyond the {MAX_SECTOR} cap")
        self.states = list(itertools.combinations(range(s), n))
        self.index = {st: i for i, st in enumerate(self.states)}
        self.generator = self._build_generator()

    def _build_generator(self):
        lk = self.kernels
        grid = lk.grid
        hd = grid.cell_volume
        sep = grid.sep_matrix
        a = lk.a_sep
        phi = lk.phi_site
        exclude_self = lk.kspec.exclude_self_term
        rows, cols, vals = [], [], []
        for i, eta in enumerate(self.states):
            occ = set(eta)
            diag = 0.0
            for u in eta:
                for v in range(grid.n_sites):
                    if v in occ:
                        continue
                    w = a[sep[u, v]] * hd
                    if w == 0.0:
                        continue
                    e = 0.0
                    for z in eta:
                        if exclude_self and z == u:
                            continue
                        e += phi[v, z]
                    rate = w * math.exp(-e)
                    target = tuple(sorted(occ - {u} | {v}))
                    rows.append(self.index[target])
                    cols.append(i)
                    vals.append(rate)
                    diag -= rate
            rows.append(i)
            cols.append(i)
            vals.append(diag)
        n_states = len(self.states)
        return sp.csr_matrix(
            sp.coo_matrix((vals, (rows, cols)), shape=(n_states, n_states)))

    def membership_matrix(self):
        """Boolean (n_states, n_sites) occupancy matrix."""
        s = self.kernels.grid.n_sites
        m = np.zeros((len(self.states), s), dtype=float)
        for i, eta in enumerate(self.states):
            m[i, list(eta)] = 1.0
        return m


@dataclass
class MasterState:
    """Probability vector over a fixed-N sector."""

    sector: Sector
    prob: np.ndarray

    def __post_init__(self):
        self.prob = np.asarray(self.prob, dtype=float)
        if self.prob.shape != (len(self.sector.states),):
            raise ValueError("probability vector has the wrong length")
        self.check()

    def check(self):
        if self.prob.min() < -1e-12:
            raise ValueError(f"negative probability {self.prob.min()}")
        np.clip(self.prob, 0.0, None, out=self.prob)
        if abs(self.prob.sum() - 1.0) > 1e-10:
            raise ValueError(f"probabilities sum to {self.prob.sum()}")

    @classmethod
    def point_mass(cls, sector, sites):
        p = np.zeros(len(sector.states))
        p[sector.index[tuple(sorted(int(s) for s in sites))]] = 1.0
        return cls(sector, p)

    @classmethod
    def uniform(cls, sector):
        n = len(sector.states)
        return cls(sector, np.full(n, 1.0 / n))


def master_equation_rhs(state):
    """Generator applied to the probability vector; sums to zero."""
    return state.sector.generator @ state.prob


def propagate(state, t):
    """Probability vector after time t (matrix exponential action)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0.0:
        return MasterState(state.sector, state.prob.copy())
    q = sp.csc_matrix(state.sector.generator * t)
    p = expm_multiply(q, state.prob)
    return MasterState(state.sector, p)


def propagate_times(state, times):
    """States at an increasing sequence of times (0 allowed first)."""
    out = []
    cur = state
    t_prev = 0.0
    for t in times:
        if t < t_prev:
            raise ValueError("times must be nondecreasing")
        cur = propagate(cur, t - t_prev)
        t_prev = t
        out.append(cur)
    return out


def stationary_state(sector):
    """Kernel of the generator, normalized to a probability vector."""
    ns = null_space(sector.generator.toarray())
    if ns.shape[1] != 1:
        raise RuntimeError(
            f"generator kernel has dimension {ns.shape[1]}, chain reducible?")
    v = ns[:, 0]
    v = v * np.sign(v.sum())
    return MasterState(sector, v / v.sum())


def energy_of(kernels, sites):
    """Pair energy of a site tuple under the lattice potential."""
    phi = kernels.phi_site
    sites = list(sites)
    total = 0.0
    for i in range(len(sites)):
        for j in range(i + 1, len(sites)):
            total += phi[sites[i], sites[j]]
    return total


def gibbs_distribution(sector):
    """Reversible law of the dynamics: weights exp(-energy), normalized."""
    w = np.array([math.exp(-energy_of(sector.kernels, st))
                  for st in sector.states])
    return MasterState(sector, w / w.sum())


def occupation_probabilities(state):
    """P(site occupied) per site."""
    return state.prob @ state.sector.membership_matrix()


def pair_probabilities(state):
    """P(both sites occupied) per site pair (diagonal set to zero)."""
    m = state.sector.membership_matrix()
    pp = np.einsum("s,si,sj->ij", state.prob, m, m)
    np.fill_diagonal(pp, 0.0)
    return pp


def correlation_moments(state):
    """Correlation values implied by the sector law.

    Returns (k1 per site, k2 per site pair): occupation probability per
    cell volume, and pair probability per squared cell volume (the
    lattice factorial-moment densities).  The k2 diagonal is zero by
    construction of the subset sector.
    """
    hd = state.sector.kernels.grid.cell_volume
    k1 = occupation_probabilities(state) / hd
    k2 = pair_probabilities(state) / (hd * hd)
    return k1, k2


def radial_average_k2(sector, k2_matrix):
    """Average the pair values over separation indices (off-diagonal)."""
    grid = sector.kernels.grid
    sep = grid.sep_matrix
    s = grid.n_sites
    sums = np.zeros(s)
    counts = np.zeros(s)
    for u in range(s):
        for v in range(s):
            if u == v:
                continue
            sums[sep[u, v]] += k2_matrix[u, v]
            counts[sep[u, v]] += 1
    with np.errstate(invalid="ignore"):
        out = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return out
