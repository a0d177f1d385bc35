import numpy as np
import pytest

from jumplab.geometry import TorusDomain
from jumplab.kernels import KernelSpec, RadialKernel, TOP_HAT
from jumplab.lattice import LatticeGrid, LatticeKernels


@pytest.fixture
def domain1d():
    return TorusDomain(1, 40.0)


@pytest.fixture
def tophat_kernels():
    # alpha = 1 (0.5 amplitude, range 1), mean_phi = 0.5 (0.5 x range 0.5)
    return KernelSpec(RadialKernel(TOP_HAT, 0.5, 1.0, 1),
                      RadialKernel(TOP_HAT, 0.5, 0.5, 1))


@pytest.fixture
def free_kernels():
    return KernelSpec(RadialKernel(TOP_HAT, 0.5, 1.0, 1),
                      RadialKernel(TOP_HAT, 0.0, 0.5, 1))


@pytest.fixture
def lattice16(tophat_kernels):
    return LatticeKernels(LatticeGrid(1, 16, 0.5), tophat_kernels)


@pytest.fixture
def lattice32(tophat_kernels):
    return LatticeKernels(LatticeGrid(1, 32, 0.25), tophat_kernels)


@pytest.fixture
def lattice32_free(free_kernels):
    return LatticeKernels(LatticeGrid(1, 32, 0.25), free_kernels)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
