import math

import numpy as np
import pytest
from scipy.integrate import quad

from jumplab.geometry import Configuration, TorusDomain, sphere_surface
from jumplab.kernels import (EXPONENTIAL, GAUSSIAN, TOP_HAT, KernelSpec,
                             RadialKernel, jump_rate_c, repulsion_sum,
                             total_energy)

ALL_FAMILIES = [
    (TOP_HAT, 0.5, 1.0),
    (GAUSSIAN, 0.8, 0.6),
    (EXPONENTIAL, 1.2, 0.4),
]


@pytest.mark.parametrize("family,amp,scale", ALL_FAMILIES)
@pytest.mark.parametrize("d", [1, 2, 3])
def test_closed_form_integral_against_quadrature(family, amp, scale, d):
    k = RadialKernel(family, amp, scale, d)
    # independent oracle: adaptive quadrature of the radial profile
    val, _ = quad(lambda r: float(k(r)) * r ** (d - 1), 0.0, k.cutoff,
                  limit=200)
    oracle = sphere_surface(d) * val
    assert k.integral() == pytest.approx(oracle, rel=1e-10)


@pytest.mark.parametrize("family,amp,scale", ALL_FAMILIES)
def test_cutoff_tail_below_threshold(family, amp, scale):
    k = RadialKernel(family, amp, scale, 2)
    assert k.truncation_error() <= 1e-12
    assert float(k(k.cutoff * 1.0000001)) == 0.0
    assert k.sup() == amp


@pytest.mark.parametrize("family,amp,scale", ALL_FAMILIES)
def test_integral_inequality_one_minus_exp(family, amp, scale):
    ks = KernelSpec(RadialKernel(TOP_HAT, 0.5, 1.0, 1),
                    RadialKernel(family, amp, scale, 1))
    val = ks.integral_one_minus_exp_phi()
    assert val <= ks.mean_phi * (1 + 1e-8)


def test_derived_constants_tophat():
    ks = KernelSpec(RadialKernel(TOP_HAT, 0.5, 1.0, 1),
                    RadialKernel(TOP_HAT, 0.5, 0.5, 1))
    assert ks.alpha == pytest.approx(1.0, rel=1e-14)
    assert ks.mean_phi == pytest.approx(0.5, rel=1e-14)
    assert ks.sup_phi == 0.5
    assert ks.cutoff_radius == 1.0


def test_jump_rate_free_case_equals_kernel(domain1d, free_kernels):
    gamma = Configuration(domain1d, [[5.0], [6.0], [20.0]])
    c = jump_rate_c(np.array([5.0]), np.array([5.5]), gamma, free_kernels)
    a_val = free_kernels.kernel_a(0.5)
    assert c == a_val


def test_jump_rate_lone_particle_self_term(domain1d, tophat_kernels):
    # single particle: the only repulsion contribution is the jumper's
    # own pre-jump position (self-term), giving a * exp(-height)
    gamma = Configuration(domain1d, [[5.0]])
    c = jump_rate_c(np.array([5.0]), np.array([5.3]), gamma, tophat_kernels)
    a_val = tophat_kernels.kernel_a(0.3)
    assert c == pytest.approx(a_val * math.exp(-0.5), rel=1e-14)


def test_jump_rate_far_target(domain1d, tophat_kernels):
    gamma = Configuration(domain1d, [[5.0], [5.2]])
    # target beyond the potential cutoff of every particle
    c = jump_rate_c(np.array([5.0]), np.array([5.9]), gamma, tophat_kernels)
    assert c == tophat_kernels.kernel_a(0.9)


def test_jump_rate_requires_membership(domain1d, tophat_kernels):
    gamma = Configuration(domain1d, [[5.0]])
    with pytest.raises(ValueError):
        jump_rate_c(np.array([4.0]), np.array([5.5]), gamma, tophat_kernels)


def test_jump_rate_envelope(domain1d, tophat_kernels, rng):
    for _ in range(50):
        pts = rng.random((4, 1)) * domain1d.side_length
        gamma = Configuration(domain1d, pts)
        y = rng.random(1) * domain1d.side_length
        c = jump_rate_c(pts[0], y, gamma, tophat_kernels)
        disp = pts[0] - y
        disp -= domain1d.side_length * np.floor(
            disp / domain1d.side_length + 0.5)
        assert c <= tophat_kernels.kernel_a(abs(float(disp))) + 1e-15


def test_exclude_self_term_switch(domain1d):
    ks = KernelSpec(RadialKernel(TOP_HAT, 0.5, 1.0, 1),
                    RadialKernel(TOP_HAT, 0.5, 0.5, 1),
                    exclude_self_term=True)
    gamma = Configuration(domain1d, [[5.0]])
    c = jump_rate_c(np.array([5.0]), np.array([5.3]), gamma, ks)
    assert c == ks.kernel_a(0.3)  # no self contribution


def test_total_energy_cases(domain1d, tophat_kernels):
    assert total_energy(Configuration(domain1d, np.empty((0, 1))),
                        tophat_kernels) == 0.0
    assert total_energy(Configuration(domain1d, [[3.0]]),
                        tophat_kernels) == 0.0
    # two particles beyond the cutoff
    far = Configuration(domain1d, [[3.0], [10.0]])
    assert total_energy(far, tophat_kernels) == 0.0
    # two particles within the top-hat range: energy = height
    near = Configuration(domain1d, [[3.0], [3.4]])
    assert total_energy(near, tophat_kernels) == pytest.approx(0.5)
    # additivity over separated clusters
    both = Configuration(domain1d, [[3.0], [3.4], [20.0], [20.3]])
    assert total_energy(both, tophat_kernels) == pytest.approx(1.0)


def test_repulsion_sum_skip(domain1d, tophat_kernels):
    gamma = Configuration(domain1d, [[3.0], [3.2]])
    y = np.array([3.1])
    full = repulsion_sum(y, gamma, tophat_kernels)
    skipped = repulsion_sum(y, gamma, tophat_kernels, skip_index=0)
    assert full == pytest.approx(1.0)
    assert skipped == pytest.approx(0.5)


@pytest.mark.parametrize("family,amp,scale", ALL_FAMILIES)
@pytest.mark.parametrize("d", [1, 2, 3])
def test_radius_sampler_matches_radial_law(family, amp, scale, d, rng):
    # oracle: mean radius from quadrature of the normalized radial law
    k = RadialKernel(family, amp, scale, d)
    num, _ = quad(lambda r: float(k(r)) * r ** d, 0.0, k.cutoff, limit=200)
    den, _ = quad(lambda r: float(k(r)) * r ** (d - 1), 0.0, k.cutoff,
                  limit=200)
    oracle_mean = num / den
    u = rng.random(40000)
    samples = k.radius_from_uniform(u)
    assert np.all(samples <= k.cutoff + 1e-12)
    se = samples.std() / math.sqrt(len(samples))
    assert samples.mean() == pytest.approx(oracle_mean, abs=4 * se)


def test_kernel_validation():
    with pytest.raises(ValueError):
        RadialKernel("box", 1.0, 1.0, 1)
    with pytest.raises(ValueError):
        RadialKernel(TOP_HAT, -1.0, 1.0, 1)
    with pytest.raises(ValueError):
        RadialKernel(TOP_HAT, 1.0, 0.0, 1)
    with pytest.raises(ValueError):
        KernelSpec(RadialKernel(TOP_HAT, 1.0, 1.0, 1),
                   RadialKernel(TOP_HAT, 1.0, 1.0, 2))
