"""Exact continuous-time simulation of the conservative jump process.

The process moves one particle at a time: a global exponential clock of
rate alpha*N fires, a uniformly chosen particle proposes a displacement
drawn from the jump kernel (normalized by alpha), and the move is
accepted with probability exp(-sum of phi over the current
configuration).  Because the state-dependent rate is bounded by the
jump kernel, this thinning scheme simulates the process exactly;
rejected proposals still advance the clock.

Randomness comes from a counter-based (Philox) stream consumed in
fixed-size blocks with a fixed number of uniforms per event, which
makes trajectories bit-reproducible for a given seed on either backend.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import backend
from ._fallback import _gather_candidates
from .geometry import Configuration, min_image
from .kernels import FAMILY_CODE, jump_rate_c, repulsion_sum, total_energy

BLOCK_ROWS = 4096


def uniform_columns(dimension):
    """Uniforms consumed per proposed event (clock, pick, radius,
    direction, acceptance)."""
    return 6 if dimension == 3 else 5


class CellGrid:
    """Spatial hash of particle indices into boxes of side >= cutoff.

    Uses intrusive doubly linked lists (head per cell, next/prev per
    particle).  When the box is too small for three cells per axis the
    grid degenerates and lookups scan all particles; correctness is
    unchanged because the potential vanishes beyond its cutoff.
    """

    def __init__(self, domain, cutoff, points):
        self.domain = domain
        self.cutoff = float(cutoff)
        L = domain.side_length
        ncx = int(L / cutoff) if cutoff > 0 else 0
        self.use_cells = ncx >= 3
        if not self.use_cells:
            ncx = 1
        self.ncx = ncx
        self.cell_len = L / ncx
        n_cells = ncx ** domain.dimension
        n = len(points)
        self.head = np.full(n_cells, -1, dtype=np.int64)
        self.nxt = np.full(n, -1, dtype=np.int64)
        self.prv = np.full(n, -1, dtype=np.int64)
        self.cell_of = np.full(n, -1, dtype=np.int64)
        self.scratch = np.empty(max(n, 1), dtype=np.int64)
        self.rebuild(points)

    def cell_index(self, point):
        cid = 0
        for k in range(self.domain.dimension):
            c = int(point[k] / self.cell_len)
            if c >= self.ncx:
                c = self.ncx - 1
            cid = cid * self.ncx + c
        return cid

    def rebuild(self, points):
        self.head.fill(-1)
        self.nxt.fill(-1)
        self.prv.fill(-1)
        self.cell_of.fill(-1)
        for j in range(len(points)):
            backend.cell_insert(j, self.cell_index(points[j]),
                                self.head, self.nxt, self.prv, self.cell_of)

    def members(self, cid):
        out = []
        j = int(self.head[cid])
        while j >= 0:
            out.append(j)
            j = int(self.nxt[j])
        return out

    def verify(self, points):
        """True iff the hash indexes exactly the given points."""
        seen = []
        for cid in range(len(self.head)):
            for j in self.members(cid):
                if self.cell_of[j] != cid or cid != self.cell_index(points[j]):
                    return False
                seen.append(j)
        return sorted(seen) == list(range(len(points)))

    def candidates(self, y):
        """Sorted indices of all particles in the 3^d cells around y."""
        if not self.use_cells:
            return np.arange(len(self.nxt), dtype=np.int64)
        cand = _gather_candidates(
            [float(v) for v in y], self.domain.dimension, self.ncx,
            self.cell_len, self.head, self.nxt)
        return np.asarray(cand, dtype=np.int64)


@dataclass
class SimState:
    """Mutable simulator state; confine each instance to one worker."""

    config: Configuration
    cells: CellGrid
    clock: float
    rng: np.random.Generator
    proposals: int = 0
    accepts: int = 0
    _uni: np.ndarray = field(default=None, repr=False)
    _cursor: int = 0
    _block_rows: int = BLOCK_ROWS

    @property
    def event_log(self):
        return {"proposals": self.proposals, "accepts": self.accepts}


@dataclass
class ReplicaResult:
    """Snapshots of one replica plus its bookkeeping counters."""

    snapshots: list
    seed: int
    counters: dict

    @property
    def acceptance_ratio(self):
        p = self.counters["proposals"]
        return self.counters["accepts"] / p if p else float("nan")

    def at(self, t):
        for ts, cfg in self.snapshots:
            if ts == t:
                return cfg
        raise KeyError(f"no snapshot at t={t}")

    @property
    def times(self):
        return [ts for ts, _ in self.snapshots]


def make_state(config, kernels, seed, block_rows=BLOCK_ROWS):
    if config.domain.dimension != kernels.dimension:
        raise ValueError("configuration and kernels disagree on dimension")
    cells = CellGrid(config.domain, kernels.kernel_phi.cutoff, config.points)
    rng = np.random.Generator(np.random.Philox(key=seed))
    return SimState(config=config.copy(), cells=cells, clock=0.0, rng=rng,
                    _block_rows=block_rows)


def _refill(state, dimension):
    state._uni = state.rng.random((state._block_rows, uniform_columns(dimension)))
    state._cursor = 0


def _kernel_args(kernels):
    ka, kp = kernels.kernel_a, kernels.kernel_phi
    return (FAMILY_CODE[ka.family], ka.cutoff, ka.scale, ka.proposal_norm(),
            FAMILY_CODE[kp.family], kp.amplitude, kp.scale, kp.cutoff)


def _advance(state, kernels, t_until):
    """Drive the event loop until the clock reaches t_until."""
    n = len(state.config)
    if n == 0:
        raise ValueError("no dynamics for an empty configuration")
    d = state.config.domain.dimension
    rate = kernels.alpha * n
    if rate <= 0:
        state.clock = t_until
        return
    (pf, pc, ps, pn, ff, fa, fs, fc) = _kernel_args(kernels)
    cells = state.cells
    while True:
        if state._uni is None or state._cursor >= state._block_rows:
            _refill(state, d)
        out = backend.run_events(
            state.config.points, state.clock, t_until, rate,
            state._uni, state._cursor,
            state.config.domain.side_length, pf, pc, ps, pn,
            ff, fa, fs, fc,
            kernels.exclude_self_term, cells.use_cells, cells.ncx,
            cells.cell_len, cells.head, cells.nxt, cells.prv, cells.cell_of,
            cells.scratch)
        t_new, used, proposals, accepts, reached = out
        state.clock = t_new
        state._cursor += used
        state.proposals += int(proposals)
        state.accepts += int(accepts)
        if reached:
            return


def step(state, kernels):
    """Execute exactly one proposed event (accepted or not).

    Advances the clock by an exponential waiting time of rate
    alpha*|configuration|; at most one particle moves and the particle
    count never changes.  Returns the mutated state.
    """
    n = len(state.config)
    if n == 0:
        raise ValueError("no dynamics for an empty configuration")
    d = state.config.domain.dimension
    rate = kernels.alpha * n
    if rate <= 0:
        raise ValueError("jump kernel has zero mass; the clock never fires")
    (pf, pc, ps, pn, ff, fa, fs, fc) = _kernel_args(kernels)
    cells = state.cells
    if state._uni is None or state._cursor >= state._block_rows:
        _refill(state, d)
    out = backend.run_events(
        state.config.points, state.clock, np.inf, rate,
        state._uni[state._cursor:state._cursor + 1], 0,
        state.config.domain.side_length, pf, pc, ps, pn,
        ff, fa, fs, fc,
        kernels.exclude_self_term, cells.use_cells, cells.ncx,
        cells.cell_len, cells.head, cells.nxt, cells.prv, cells.cell_of,
        cells.scratch)
    t_new, used, proposals, accepts, _ = out
    state.clock = t_new
    state._cursor += used
    state.proposals += int(proposals)
    state.accepts += int(accepts)
    return state


def snapshot_schedule(t_end, snapshot_dt):
    if t_end <= 0 or snapshot_dt <= 0:
        raise ValueError("t_end and snapshot_dt must be positive")
    times = [0.0]
    i = 1
    while i * snapshot_dt < t_end:
        times.append(i * snapshot_dt)
        i += 1
    if abs(times[-1] - t_end) < 1e-12 * max(1.0, t_end):
        times[-1] = t_end
    else:
        times.append(t_end)
    return times


def run(initial, kernels, t_end, snapshot_dt, seed, block_rows=BLOCK_ROWS):
    """Simulate one replica, snapshotting on the configured schedule.

    Deterministic for a given seed.  The particle count is asserted
    constant at every snapshot; a violation raises instead of being
    logged.
    """
    state = make_state(initial, kernels, seed, block_rows=block_rows)
    n0 = len(initial)
    schedule = snapshot_schedule(t_end, snapshot_dt)
    snapshots = [(0.0, state.config.copy())]
    for target in schedule[1:]:
        _advance(state, kernels, target)
        if len(state.config) != n0:
            raise RuntimeError(
                f"particle count changed: {n0} -> {len(state.config)}")
        snapshots.append((target, state.config.copy()))
    return ReplicaResult(snapshots=snapshots, seed=seed,
                         counters=dict(state.event_log))


def run_replicas(initial_factory, kernels, t_end, snapshot_dt, seed,
                 n_replicas, threads=1):
    """Independent replicas; replica r uses seed XOR r.

    ``initial_factory(rng)`` builds the initial configuration from the
    replica's own stream, so results are reproducible replica by
    replica and independent of the execution order.
    """

    def one(r):
        s = seed ^ r
        rng = np.random.Generator(np.random.Philox(key=(s, 0x9e3779b9)))
        initial = initial_factory(rng)
        return run(initial, kernels, t_end, snapshot_dt, s)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, range(n_replicas)))
    return [one(r) for r in range(n_replicas)]


def poisson_configuration(domain, kappa, rng):
    """Poisson(kappa) sample on the torus: Poisson count, uniform positions."""
    if kappa < 0:
        raise ValueError("intensity must be nonnegative")
    n = int(rng.poisson(kappa * domain.volume))
    pts = rng.random((n, domain.dimension)) * domain.side_length
    return Configuration(domain, pts)


def jittered_grid_configuration(domain, per_axis, jitter, rng):
    """Regular grid of per_axis^d points, jittered by +-jitter/2 spacings."""
    d = domain.dimension
    spacing = domain.side_length / per_axis
    axes = [np.arange(per_axis) * spacing + spacing / 2.0] * d
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    pts = pts + (rng.random(pts.shape) - 0.5) * jitter * spacing
    return Configuration(domain, domain.wrap(pts))


def acceptance_weight(config, kernels, y, mover_index, cells=None):
    """Repulsion sum at the proposal target y, via cells or brute force.

    With ``cells`` the candidate set comes from the 3^d neighboring
    boxes; without it every particle is scanned.  Both paths feed the
    active backend's summation kernel, so they agree to the last bit
    whenever the cell grid is consistent (the potential vanishes beyond
    its cutoff).
    """
    y = np.asarray(y, dtype=float)
    if cells is not None:
        cand = cells.candidates(y)
    else:
        cand = np.arange(len(config), dtype=np.int64)
    kp = kernels.kernel_phi
    skip = mover_index if kernels.exclude_self_term else -1
    return backend.phi_sum_candidates(
        config.points, cand, y, config.domain.side_length,
        FAMILY_CODE[kp.family], kp.amplitude, kp.scale, kp.cutoff, skip)


def log_jump_rate(x_index, y, gamma, kernels):
    """log of the jump rate from gamma.points[x_index] to y."""
    x = gamma.points[x_index]
    disp = min_image(x, y, gamma.domain)
    a_val = kernels.kernel_a(float(np.sqrt(np.sum(disp * disp))))
    if a_val <= 0.0:
        raise ValueError("proposal outside the jump kernel support")
    skip = x_index if kernels.exclude_self_term else -1
    return math.log(a_val) - repulsion_sum(y, gamma, kernels, skip_index=skip)


def detailed_balance_probe(n_trials, n_particles, kernels, domain, seed):
    """Max |log c(x,y)e^-E - log c(y,x)e^-E'| over random single jumps.

    An exact algebraic identity of the rate: the result is rounding
    noise (<= 1e-12) for any kernel pair, with or without the
    self-term.
    """
    rng = np.random.Generator(np.random.Philox(key=seed))
    worst = 0.0
    for _ in range(n_trials):
        pts = rng.random((n_particles, domain.dimension)) * domain.side_length
        gamma = Configuration(domain, pts)
        i = int(rng.integers(n_particles))
        r = kernels.kernel_a.radius_from_uniform(float(rng.random()))
        direction = rng.normal(size=domain.dimension)
        norm = float(np.sqrt(np.sum(direction * direction)))
        if norm == 0.0:
            direction = np.ones(domain.dimension)
            norm = math.sqrt(domain.dimension)
        y = domain.wrap(gamma.points[i] + r * direction / norm)
        lhs = log_jump_rate(i, y, gamma, kernels) - total_energy(gamma, kernels)
        moved = gamma.copy()
        moved.points[i] = y
        rhs = log_jump_rate(i, gamma.points[i], moved, kernels) - total_energy(
            moved, kernels)
        worst = max(worst, abs(lhs - rhs))
    return worst


@dataclass
class LatticeReplicaResult:
    """Occupied-site snapshots of one lattice replica."""

    snapshots: list
    seed: int
    counters: dict

    @property
    def acceptance_ratio(self):
        p = self.counters["proposals"]
        return self.counters["accepts"] / p if p else float("nan")


def run_lattice(lattice_kernels, initial_sites, t_end, snapshot_dt, seed,
                block_rows=BLOCK_ROWS):
    """Simulate the lattice variant of the process (site exclusion).

    Proposals draw a separation offset with probability proportional to
    the jump kernel's lattice weights; moves onto occupied sites are
    rejected, which keeps the state a set of sites and matches the
    finite master-equation sector used for cross-validation.
    """
    lk = lattice_kernels
    site_of = np.asarray(initial_sites, dtype=np.int64).copy()
    n = len(site_of)
    if n == 0:
        raise ValueError("no dynamics for an empty configuration")
    if len(np.unique(site_of)) != n:
        raise ValueError("initial sites must be distinct")
    occ = np.zeros(lk.grid.n_sites, dtype=np.int64)
    occ[site_of] = 1
    rate = lk.alpha * n
    rng = np.random.Generator(np.random.Philox(key=seed))
    schedule = snapshot_schedule(t_end, snapshot_dt)
    snapshots = [(0.0, site_of.copy())]
    clock = 0.0
    proposals = 0
    accepts = 0
    uni = None
    cursor = 0
    for target in schedule[1:]:
        while True:
            if uni is None or cursor >= block_rows:
                uni = rng.random((block_rows, 4))
                cursor = 0
            out = backend.run_events_lattice(
                site_of, occ, clock, target, rate, uni, cursor,
                lk.proposal_cdf, lk.target_table, lk.phi_site,
                lk.kspec.exclude_self_term)
            clock, used, prop, acc, reached = out
            cursor += used
            proposals += int(prop)
            accepts += int(acc)
            if reached:
                break
        if int(occ.sum()) != n:
            raise RuntimeError("particle count changed on the lattice")
        snapshots.append((target, site_of.copy()))
    return LatticeReplicaResult(
        snapshots=snapshots, seed=seed,
        counters={"proposals": proposals, "accepts": accepts})


def run_lattice_replicas(lattice_kernels, initial_sites, t_end, snapshot_dt,
                         seed, n_replicas, threads=1):
    def one(r):
        return run_lattice(lattice_kernels, initial_sites, t_end, snapshot_dt,
                           seed ^ r)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, range(n_replicas)))
    return [one(r) for r in range(n_replicas)]
