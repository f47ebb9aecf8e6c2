import numpy as np
import pytest

from svgd_lab import _pairops
from svgd_lab.kernels import BilinearMaternKernel, GaussianKernel, MaternKernel
from svgd_lab.potentials import DiagonalGaussian, GaussianMixture, IsotropicGaussian


@pytest.fixture(scope="session", autouse=True)
def _warm_numba():
    # compile (or load from disk cache) the pair-sum kernels once up front so
    # individual test timings are meaningful
    _pairops.warm_up()


@pytest.fixture
def rng():
    return np.random.default_rng(17)


def all_kernels(dim):
    return [
        GaussianKernel(dim, h=1.0),
        GaussianKernel(dim, h=0.5),
        MaternKernel(dim, nu=2.5),
        MaternKernel(dim, nu=3.5, sigma_diag=np.linspace(0.5, 1.5, dim)),
        BilinearMaternKernel(dim, nu=2.5),
    ]


def all_potentials(dim):
    return [
        IsotropicGaussian(dim, c0=1.0),
        DiagonalGaussian(dim, scales=np.linspace(0.5, 2.0, dim), c0=2.0),
        GaussianMixture(dim, mu=1.5, c0=1.0),
    ]
