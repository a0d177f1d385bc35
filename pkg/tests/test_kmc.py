import math

import numpy as np
import pytest

from jumplab.geometry import Configuration, TorusDomain
from jumplab.kernels import KernelSpec, RadialKernel, TOP_HAT
from jumplab import kmc
from jumplab.lattice import LatticeGrid, LatticeKernels
from jumplab.master import Sector, gibbs_distribution


def test_step_advances_clock_and_counts(domain1d, tophat_kernels, rng):
    cfg = kmc.poisson_configuration(domain1d, 0.5, rng)
    state = kmc.make_state(cfg, tophat_kernels, seed=4)
    t0 = state.clock
    kmc.step(state, tophat_kernels)
    assert state.clock > t0
    assert state.proposals == 1
    assert len(state.config) == len(cfg)


def test_step_free_case_accepts_everything(domain1d, free_kernels, rng):
    cfg = kmc.poisson_configuration(domain1d, 0.5, rng)
    state = kmc.make_state(cfg, free_kernels, seed=4)
    for _ in range(200):
        kmc.step(state, free_kernels)
    assert state.accepts == state.proposals == 200


def test_step_empty_configuration_errors(domain1d, tophat_kernels):
    cfg = Configuration(domain1d, np.empty((0, 1)))
    state = kmc.make_state(cfg, tophat_kernels, seed=1)
    with pytest.raises(ValueError):
        kmc.step(state, tophat_kernels)


def test_single_particle_self_term_weight(domain1d, tophat_kernels):
    # lone particle, proposal within the potential range: the acceptance
    # weight is exactly the self-term height
    cfg = Configuration(domain1d, [[5.0]])
    w = kmc.acceptance_weight(cfg, tophat_kernels, np.array([5.3]), 0)
    assert w == pytest.approx(0.5)
    assert math.exp(-w) == pytest.approx(math.exp(-0.5))
    # proposal beyond the potential range: no terms at all
    w_far = kmc.acceptance_weight(cfg, tophat_kernels, np.array([5.9]), 0)
    assert w_far == 0.0


def test_run_determinism(domain1d, tophat_kernels, rng):
    cfg = kmc.poisson_configuration(domain1d, 0.5, rng)
    a = kmc.run(cfg, tophat_kernels, t_end=2.0, snapshot_dt=0.5, seed=11)
    b = kmc.run(cfg, tophat_kernels, t_end=2.0, snapshot_dt=0.5, seed=11)
    assert a.counters == b.counters
    for (ta, ca), (tb, cb) in zip(a.snapshots, b.snapshots):
        assert ta == tb
        assert np.array_equal(ca.points, cb.points)
        assert np.array_equal(ca.ids, cb.ids)


def test_run_block_size_invariance(domain1d, tophat_kernels, rng):
    # the uniform-consumption protocol makes the block size irrelevant
    cfg = kmc.poisson_configuration(domain1d, 0.4, rng)
    a = kmc.run(cfg, tophat_kernels, 1.0, 0.25, seed=9, block_rows=7)
    b = kmc.run(cfg, tophat_kernels, 1.0, 0.25, seed=9, block_rows=4096)
    assert a.counters == b.counters
    for (_, ca), (_, cb) in zip(a.snapshots, b.snapshots):
        assert np.array_equal(ca.points, cb.points)


def test_run_vs_manual_steps(domain1d, tophat_kernels, rng):
    # driving the state by single steps consumes the same stream
    cfg = kmc.poisson_configuration(domain1d, 0.4, rng)
    rep = kmc.run(cfg, tophat_kernels, 1.0, 1.0, seed=13)
    state = kmc.make_state(cfg, tophat_kernels, seed=13)
    while True:
        before = state.config.points.copy()
        t_before = state.clock
        kmc.step(state, tophat_kernels)
        if state.clock > 1.0:
            # the crossing event is discarded by the snapshot protocol
            state.config.points[:] = before
            state.clock = t_before
            break
    final = rep.snapshots[-1][1]
    assert np.array_equal(final.points, state.config.points)


def test_snapshot_schedule_cases():
    assert kmc.snapshot_schedule(2.0, 0.5) == [0.0, 0.5, 1.0, 1.5, 2.0]
    # t_end below the snapshot interval: initial plus final only
    assert kmc.snapshot_schedule(0.3, 0.5) == [0.0, 0.3]
    with pytest.raises(ValueError):
        kmc.snapshot_schedule(0.0, 0.5)
    with pytest.raises(ValueError):
        kmc.snapshot_schedule(1.0, -0.5)


def test_conservation_along_run(domain1d, tophat_kernels, rng):
    cfg = kmc.poisson_configuration(domain1d, 0.5, rng)
    rep = kmc.run(cfg, tophat_kernels, t_end=2.0, snapshot_dt=0.5, seed=21)
    n0 = len(cfg)
    for _, snap in rep.snapshots:
        assert len(snap) == n0
        assert sorted(snap.ids) == sorted(cfg.ids)


def test_free_jump_count_statistics():
    # per-particle jump rate is alpha; mean jumps per particle over
    # [0, 1] is alpha within 3 standard errors across replicas
    domain = TorusDomain(1, 200.0)
    kernels = KernelSpec(RadialKernel(TOP_HAT, 0.5, 1.0, 1),
                         RadialKernel(TOP_HAT, 0.0, 0.5, 1))
    reps = kmc.run_replicas(
        lambda rng: kmc.poisson_configuration(domain, 0.5, rng),
        kernels, t_end=1.0, snapshot_dt=1.0, seed=33, n_replicas=100)
    per_particle = np.array([
        r.counters["accepts"] / len(r.snapshots[0][1]) for r in reps])
    se = per_particle.std(ddof=1) / math.sqrt(len(per_particle))
    assert abs(per_particle.mean() - kernels.alpha * 1.0) <= 3 * se


def test_replica_seeds_and_threads(domain1d, tophat_kernels):
    def factory(rng):
        return kmc.poisson_configuration(domain1d, 0.4, rng)

    seq = kmc.run_replicas(factory, tophat_kernels, 1.0, 0.5, seed=17,
                           n_replicas=4, threads=1)
    par = kmc.run_replicas(factory, tophat_kernels, 1.0, 0.5, seed=17,
                           n_replicas=4, threads=2)
    assert [r.seed for r in seq] == [17 ^ 0, 17 ^ 1, 17 ^ 2, 17 ^ 3]
    for a, b in zip(seq, par):
        assert a.counters == b.counters
        assert np.array_equal(a.snapshots[-1][1].points,
                              b.snapshots[-1][1].points)


def test_cell_grid_verify_and_membership(domain1d, tophat_kernels, rng):
    pts = rng.random((50, 1)) * domain1d.side_length
    cells = kmc.CellGrid(domain1d, tophat_kernels.kernel_phi.cutoff, pts)
    assert cells.use_cells
    assert cells.verify(pts)
    # candidate set always contains every particle within the cutoff
    for _ in range(100):
        y = rng.random(1) * domain1d.side_length
        cand = set(int(i) for i in cells.candidates(y))
        d = np.abs(pts[:, 0] - y[0])
        d = np.minimum(d, domain1d.side_length - d)
        needed = set(np.nonzero(d <= cells.cutoff)[0].tolist())
        assert needed <= cand


def test_detailed_balance_probe(domain1d, tophat_kernels, free_kernels):
    worst = kmc.detailed_balance_probe(100, 6, tophat_kernels, domain1d,
                                       seed=23)
    assert worst <= 1e-12
    worst_free = kmc.detailed_balance_probe(50, 4, free_kernels, domain1d,
                                            seed=23)
    assert worst_free <= 1e-15
    worst_single = kmc.detailed_balance_probe(50, 1, tophat_kernels,
                                              domain1d, seed=23)
    assert worst_single <= 1e-12


def test_detailed_balance_probe_excluded_self(domain1d):
    ks = KernelSpec(RadialKernel(TOP_HAT, 0.5, 1.0, 1),
                    RadialKernel(TOP_HAT, 0.5, 0.5, 1),
                    exclude_self_term=True)
    assert kmc.detailed_balance_probe(100, 5, ks, domain1d, seed=29) <= 1e-12


def test_lattice_run_conserves_and_reproduces(lattice16):
    rep1 = kmc.run_lattice(lattice16, (2, 5), 2.0, 0.5, seed=31)
    rep2 = kmc.run_lattice(lattice16, (2, 5), 2.0, 0.5, seed=31)
    for (t1, s1), (t2, s2) in zip(rep1.snapshots, rep2.snapshots):
        assert t1 == t2
        assert np.array_equal(s1, s2)
        assert len(np.unique(s1)) == 2
    with pytest.raises(ValueError):
        kmc.run_lattice(lattice16, (2, 2), 1.0, 0.5, seed=1)


def test_lattice_long_run_matches_gibbs(lattice16):
    # time-average over a long reversible trajectory approaches the
    # stationary pair-distance law
    reps = kmc.run_lattice_replicas(lattice16, (3, 4), 30.0, 5.0, seed=37,
                                    n_replicas=200)
    sector = Sector(lattice16, 2)
    gibbs = gibbs_distribution(sector)
    p_adjacent = sum(gibbs.prob[i] for i, st in enumerate(sector.states)
                     if (st[1] - st[0]) % 16 in (1, 15))
    hits = []
    for rep in reps:
        for t, sites in rep.snapshots:
            if t >= 15.0:
                gap = (int(sites[1]) - int(sites[0])) % 16
                hits.append(1.0 if gap in (1, 15) else 0.0)
    hits = np.array(hits)
    se = hits.std(ddof=1) / math.sqrt(len(hits))
    assert abs(hits.mean() - p_adjacent) <= 4 * se
