"""Contract tests between the compiled core and the pure-Python mirror:
bit-identical trajectories, identical summation kernels, and agreement
with the numpy reference implementations."""

import numpy as np
import pytest

from jumplab import _fallback
from jumplab import backend
from jumplab.geometry import Configuration, TorusDomain
from jumplab.kernels import (EXPONENTIAL, FAMILY_CODE, GAUSSIAN, TOP_HAT,
                             KernelSpec, RadialKernel, repulsion_sum,
                             total_energy)
from jumplab.kmc import CellGrid, uniform_columns
from jumplab.lattice import LatticeGrid, LatticeKernels

compiled = pytest.importorskip("jumplab._core")

CASES = [
    (1, TOP_HAT, TOP_HAT),
    (2, GAUSSIAN, EXPONENTIAL),
    (3, EXPONENTIAL, GAUSSIAN),
]


def _run_once(impl, d, fam_a, fam_p, seed=3, n=40, rows=1500):
    dom = TorusDomain(d, 12.0)
    ka = RadialKernel(fam_a, 0.5, 1.0, d)
    kp = RadialKernel(fam_p, 0.8, 0.6, d)
    ks = KernelSpec(ka, kp)
    pts = np.random.Generator(np.random.Philox(key=7)).random((n, d)) * 12.0
    cfg = Configuration(dom, pts.copy())
    cells = CellGrid(dom, kp.cutoff, cfg.points)
    uni = np.random.Generator(np.random.Philox(key=seed)).random(
        (rows, uniform_columns(d)))
    out = impl.run_events(
        cfg.points, 0.0, 1e9, ks.alpha * n, uni, 0,
        dom.side_length, FAMILY_CODE[fam_a], ka.cutoff, ka.scale,
        ka.proposal_norm(), FAMILY_CODE[fam_p], kp.amplitude, kp.scale,
        kp.cutoff, False, cells.use_cells, cells.ncx, cells.cell_len,
        cells.head, cells.nxt, cells.prv, cells.cell_of, cells.scratch)
    return cfg.points, out


@pytest.mark.parametrize("d,fam_a,fam_p", CASES)
def test_backends_bit_identical_continuum(d, fam_a, fam_p):
    pos_c, out_c = _run_once(compiled, d, fam_a, fam_p)
    pos_p, out_p = _run_once(_fallback, d, fam_a, fam_p)
    assert np.array_equal(pos_c, pos_p)
    assert out_c == out_p


def test_backends_bit_identical_lattice():
    grid = LatticeGrid(1, 16, 0.5)
    ks = KernelSpec(RadialKernel(TOP_HAT, 0.5, 1.0, 1),
                    RadialKernel(TOP_HAT, 0.5, 0.5, 1))
    lk = LatticeKernels(grid, ks)
    uni = np.random.Generator(np.random.Philox(key=5)).random((4000, 4))
    results = []
    for impl in (compiled, _fallback):
        site_of = np.array([2, 3, 9], dtype=np.int64)
        occ = np.zeros(16, dtype=np.int64)
        occ[site_of] = 1
        out = impl.run_events_lattice(
            site_of, occ, 0.0, 1e9, lk.alpha * 3, uni, 0, lk.proposal_cdf,
            lk.target_table, lk.phi_site, False)
        results.append((site_of.copy(), out))
    assert np.array_equal(results[0][0], results[1][0])
    assert results[0][1] == results[1][1]


def test_phi_sum_matches_numpy_reference(rng):
    dom = TorusDomain(2, 9.0)
    ks = KernelSpec(RadialKernel(TOP_HAT, 0.5, 1.0, 2),
                    RadialKernel(GAUSSIAN, 0.7, 0.5, 2))
    pts = rng.random((30, 2)) * 9.0
    cfg = Configuration(dom, pts)
    kp = ks.kernel_phi
    for impl in (compiled, _fallback):
        for _ in range(50):
            y = rng.random(2) * 9.0
            cand = np.arange(30, dtype=np.int64)
            got = impl.phi_sum_candidates(
                pts, cand, y, 9.0, FAMILY_CODE[kp.family], kp.amplitude,
                kp.scale, kp.cutoff, -1)
            want = repulsion_sum(y, cfg, ks)
            assert got == pytest.approx(want, abs=1e-13)


def test_pair_energy_matches_total_energy(rng):
    dom = TorusDomain(1, 20.0)
    ks = KernelSpec(RadialKernel(TOP_HAT, 0.5, 1.0, 1),
                    RadialKernel(EXPONENTIAL, 0.7, 0.3, 1))
    pts = rng.random((25, 1)) * 20.0
    cfg = Configuration(dom, pts)
    kp = ks.kernel_phi
    for impl in (compiled, _fallback):
        got = impl.pair_energy(pts, 20.0, FAMILY_CODE[kp.family],
                               kp.amplitude, kp.scale, kp.cutoff)
        assert got == pytest.approx(total_energy(cfg, ks), abs=1e-12)


def test_active_backend_is_compiled():
    assert backend.backend_name() == "compiled"
