"""Periodic lattice discretization shared by the correlation hierarchy,
the master-equation oracle and the lattice simulator.

Volume integrals become lattice sums times the cell volume h^d, and the
derived constants (jump mass, potential integral) are recomputed as the
same lattice sums, so the dynamics and the horizon certificates consume
one consistent set of numbers.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class LatticeGrid:
    """d-dimensional periodic lattice, d in {1, 2}, M sites per axis.

    Sites are indexed row-major; separations (site differences mod M)
    live on the same index set, which makes translation-invariant
    fields arrays over separation indices.
    """

    dimension: int
    sites_per_axis: int
    spacing: float

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValueError("lattice dimension must be 1 or 2")
        if self.sites_per_axis < 2:
            raise ValueError("need at least two sites per axis")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")

    @property
    def n_sites(self):
        return self.sites_per_axis ** self.dimension

    @property
    def side_length(self):
        return self.sites_per_axis * self.spacing

    @property
    def cell_volume(self):
        return self.spacing ** self.dimension

    @cached_property
    def axis_indices(self):
        """(S, dim) per-axis integer coordinates of every site index."""
        m = self.sites_per_axis
        idx = np.arange(self.n_sites)
        if self.dimension == 1:
            return idx.reshape(-1, 1)
        return np.stack([idx // m, idx % m], axis=1)

    def site_index(self, axis_coords):
        m = self.sites_per_axis
        coords = np.asarray(axis_coords) % m
        if self.dimension == 1:
            return coords[..., 0]
        return coords[..., 0] * m + coords[..., 1]

    @cached_property
    def positions(self):
        return self.axis_indices.astype(float) * self.spacing

    @cached_property
    def sep_displacements(self):
        """Min-image physical displacement vector of every separation index."""
        delta = self.axis_indices.astype(float) * self.spacing
        L = self.side_length
        return delta - L * np.floor(delta / L + 0.5)

    @cached_property
    def sep_radii(self):
        d = self.sep_displacements
        return np.sqrt(np.sum(d * d, axis=1))

    @cached_property
    def sep_matrix(self):
        """SEP[u, v] = separation index of v - u."""
        ax = self.axis_indices
        diff = ax[None, :, :] - ax[:, None, :]
        return self.site_index(diff).astype(np.int64)

    @cached_property
    def sub_matrix(self):
        """SUB[r, s] = separation index of r - s (for convolutions)."""
        ax = self.axis_indices
        diff = ax[:, None, :] - ax[None, :, :]
        return self.site_index(diff).astype(np.int64)

    @cached_property
    def add_matrix(self):
        """ADD[u, k] = site index of u shifted by separation k."""
        ax = self.axis_indices
        summed = ax[:, None, :] + ax[None, :, :]
        return self.site_index(summed).astype(np.int64)

    @cached_property
    def neg_index(self):
        """NEG[r] = separation index of -r."""
        return self.site_index(-self.axis_indices).astype(np.int64)

    def convolve(self, f_sep, g_sep):
        """(f * g)[r] = sum_s f[s] g[r - s], both arrays over separations."""
        g = np.asarray(g_sep, dtype=float)
        return np.asarray(g[self.sub_matrix], dtype=float) @ np.asarray(
            f_sep, dtype=float)


@dataclass
class LatticeKernels:
    """Jump-kernel and potential tables on a lattice.

    ``alpha`` and ``mean_phi`` are the lattice sums replacing the
    continuum integrals; ``t_sep`` is exp(-phi) - 1, the expansion
    weight of the crowding correction operator.
    """

    grid: LatticeGrid
    kspec: "KernelSpec"
    a_sep: np.ndarray = field(init=False)
    phi_sep: np.ndarray = field(init=False)
    tau_sep: np.ndarray = field(init=False)
    t_sep: np.ndarray = field(init=False)

    def __post_init__(self):
        r = self.grid.sep_radii
        self.a_sep = np.asarray(self.kspec.kernel_a(r), dtype=float)
        self.phi_sep = np.asarray(self.kspec.kernel_phi(r), dtype=float)
        self.tau_sep = np.exp(-self.phi_sep)
        self.t_sep = self.tau_sep - 1.0

    @property
    def alpha(self):
        return float(self.a_sep.sum()) * self.grid.cell_volume

    @property
    def mean_phi(self):
        return float(self.phi_sep.sum()) * self.grid.cell_volume

    @property
    def t_integral(self):
        """Lattice integral of exp(-phi) - 1; in [-mean_phi, 0]."""
        return float(self.t_sep.sum()) * self.grid.cell_volume

    @cached_property
    def phi_site(self):
        """phi between site pairs: phi_site[v, z] = phi(pos_v - pos_z)."""
        return self.phi_sep[self.grid.sep_matrix]

    @cached_property
    def proposal_cdf(self):
        """Cumulative law of the separation offset under the jump kernel."""
        w = self.a_sep * self.grid.cell_volume
        total = w.sum()
        if total <= 0:
            raise ValueError("jump kernel vanishes on the lattice")
        return np.cumsum(w / total)

    @cached_property
    def target_table(self):
        return self.grid.add_matrix

    def manifest_entry(self):
        return {
            "dimension": self.grid.dimension,
            "sites_per_axis": self.grid.sites_per_axis,
            "spacing": self.grid.spacing,
            "alpha_lattice": self.alpha,
            "mean_phi_lattice": self.mean_phi,
            "t_integral_lattice": self.t_integral,
        }
