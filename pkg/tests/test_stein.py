import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import all_kernels, all_potentials
from fdtools import fd_div12_kernel, fd_grad1_kernel, fd_grad2_kernel
from svgd_lab.dynamics import integrate_continuous
from svgd_lab.harness import fit_loglog
from svgd_lab.kernels import BilinearMaternKernel, GaussianKernel, MaternKernel
from svgd_lab.potentials import DiagonalGaussian, GaussianMixture, IsotropicGaussian
from svgd_lab.stein import (
    c_star,
    c_star_sup,
    ksd_over_trajectory,
    ksd_squared,
    pair_pool,
    stein_kernel_u,
    time_average,
    w2_rate_exponent,
)

E1 = np.array([1.0, 0.0])
ZERO = np.zeros(2)


def naive_u(kernel, potential, x, y):
    """Independent recomposition of the Stein kernel from the four pieces."""
    gx = potential.grad(x)
    gy = potential.grad(y)
    return (
        float(gx @ gy) * kernel.eval(x, y)
        - float(gx @ kernel.grad2(x, y))
        - float(gy @ kernel.grad1(x, y))
        + kernel.div12(x, y)
    )


def fd_u(kernel, potential, x, y):
    """Stein kernel with every kernel derivative replaced by finite differences."""
    gx = potential.grad(x)
    gy = potential.grad(y)
    return (
        float(gx @ gy) * kernel.eval(x, y)
        - float(gx @ fd_grad2_kernel(kernel, x, y))
        - float(gy @ fd_grad1_kernel(kernel, x, y))
        + fd_div12_kernel(kernel, x, y)
    )


def naive_ksd2(kernel, potential, X, u=naive_u):
    N = X.shape[0]
    total = 0.0
    for i in range(N):
        for j in range(N):
            total += u(kernel, potential, X[i], X[j])
    return total / (N * N)


# ---------------------------------------------------------------------------
# Stein kernel u
# ---------------------------------------------------------------------------


def test_u_hand_values():
    k = GaussianKernel(2, h=1.0)
    p = IsotropicGaussian(2, c0=1.0)
    assert_allclose(stein_kernel_u(k, p, ZERO, ZERO), 2.0, rtol=1e-12)
    assert_allclose(stein_kernel_u(k, p, ZERO, E1), 0.0, atol=1e-12)
    assert_allclose(stein_kernel_u(k, p, E1, E1), 3.0, rtol=1e-12)


def test_u_symmetric(rng):
    for k in all_kernels(2):
        for p in all_potentials(2):
            for _ in range(20):
                x = rng.standard_normal(2)
                y = rng.standard_normal(2)
                assert_allclose(
                    stein_kernel_u(k, p, x, y), stein_kernel_u(k, p, y, x), rtol=1e-12
                )


def test_u_matches_naive_composition(rng):
    for k in all_kernels(3):
        for p in all_potentials(3):
            for _ in range(15):
                x = rng.standard_normal(3)
                y = rng.standard_normal(3)
                assert_allclose(
                    stein_kernel_u(k, p, x, y), naive_u(k, p, x, y), rtol=1e-12, atol=1e-14
                )


def test_u_matches_finite_difference_composition(rng):
    k = GaussianKernel(2, h=1.0)
    p = GaussianMixture(2, mu=1.5, c0=1.0)
    for _ in range(25):
        x = rng.standard_normal(2)
        y = rng.standard_normal(2)
        got = stein_kernel_u(k, p, x, y)
        want = fd_u(k, p, x, y)
        assert abs(got - want) <= 1e-4 * max(1.0, abs(want))


def test_u_dimension_mismatch():
    k = GaussianKernel(2, h=1.0)
    p = IsotropicGaussian(2, c0=1.0)
    with pytest.raises(ValueError):
        stein_kernel_u(k, p, np.zeros(3), np.zeros(2))


# ---------------------------------------------------------------------------
# KSD^2 V-statistic
# ---------------------------------------------------------------------------


def test_ksd_hand_values():
    k = GaussianKernel(2, h=1.0)
    p = IsotropicGaussian(2, c0=1.0)
    assert_allclose(ksd_squared(k, p, ZERO[None, :]).ksd2, 2.0, rtol=1e-12)
    X = np.stack([ZERO, E1])
    assert_allclose(ksd_squared(k, p, X).ksd2, 1.25, rtol=1e-12)


def test_ksd_report_fields():
    k = GaussianKernel(2, h=1.0)
    p = IsotropicGaussian(2, c0=1.0)
    rep = ksd_squared(k, p, np.stack([ZERO, E1]))
    assert rep.n == 2
    assert rep.estimator == "v_statistic"
    assert rep.kernel == k.describe()
    assert rep.potential == p.describe()


def test_ksd_matches_naive_double_loop(rng):
    for k in all_kernels(2):
        for p in all_potentials(2):
            N = int(rng.integers(2, 12))
            X = rng.standard_normal((N, 2)) * 1.5
            assert_allclose(
                ksd_squared(k, p, X).ksd2, naive_ksd2(k, p, X), rtol=1e-11, atol=1e-13
            )


def test_ksd_matches_finite_difference_double_loop(rng):
    # independent oracle: naive double loop with FD kernel derivatives
    for _ in range(8):
        d = int(rng.integers(1, 5))
        N = int(rng.integers(2, 17))
        k = GaussianKernel(d, h=1.0)
        p = IsotropicGaussian(d, c0=1.0)
        X = rng.standard_normal((N, d))
        got = ksd_squared(k, p, X).ksd2
        want = naive_ksd2(k, p, X, u=fd_u)
        assert abs(got - want) <= 1e-4 * max(abs(want), 1e-3)


def test_ksd_permutation_invariant_bitwise(rng):
    k = GaussianKernel(2, h=1.0)
    p = GaussianMixture(2, mu=1.5, c0=1.0)
    X = rng.standard_normal((10, 2))
    base = ksd_squared(k, p, X).ksd2
    for _ in range(6):
        perm = rng.permutation(10)
        assert ksd_squared(k, p, X[perm]).ksd2 == base


def test_ksd_nonnegative(rng):
    for k in all_kernels(2):
        for p in all_potentials(2):
            for _ in range(10):
                X = rng.standard_normal((int(rng.integers(1, 20)), 2)) * 2.0
                assert ksd_squared(k, p, X).ksd2 >= 0.0


def test_ksd_iid_rate(rng):
    # i.i.d. target samples: mean KSD^2 over replicates decays like 1/N
    k = GaussianKernel(2, h=1.0)
    p = IsotropicGaussian(2, c0=1.0)
    points = []
    for N in (16, 64, 256):
        vals = [
            ksd_squared(k, p, p.sample_reference(N, 1000 + 17 * N + r)).ksd2
            for r in range(20)
        ]
        points.append((N, float(np.mean(vals))))
    fit = fit_loglog(points)
    assert -1.3 <= fit.slope <= -0.7


def test_ksd_over_trajectory_caches(rng):
    k = GaussianKernel(2, h=1.0)
    p = IsotropicGaussian(2, c0=1.0)
    tr = integrate_continuous(k, p, rng.standard_normal((6, 2)), 1.0, dt=0.25)
    vals = ksd_over_trajectory(k, p, tr)
    assert vals.shape == (tr.n_snapshots,)
    assert np.array_equal(tr.extras["ksd2"], vals)
    for s in range(tr.n_snapshots):
        assert_allclose(vals[s], ksd_squared(k, p, tr.states[s]).ksd2, rtol=1e-14)
    # SVGD decreases KSD^2 essentially monotonically on this easy instance
    assert vals[-1] < vals[0]


# ---------------------------------------------------------------------------
# C* diagnostics
# ---------------------------------------------------------------------------


def test_c_star_gaussian_gaussian_constant(rng):
    k = GaussianKernel(2, h=1.0)
    p = IsotropicGaussian(2, c0=1.0)
    for _ in range(100):
        z = rng.standard_normal(2) * 3.0
        assert abs(c_star(k, p, z) - 4.0) <= 1e-12


def test_c_star_matern_frozen():
    k = MaternKernel(2, nu=2.5)
    p = IsotropicGaussian(2, c0=1.0)
    # psi(0) * d - lap psi(0) = 0.4 + 2/15
    assert_allclose(c_star(k, p, ZERO), 8.0 / 15.0, rtol=1e-12)
    assert_allclose(c_star(k, p, np.array([1.7, -0.3])), 8.0 / 15.0, rtol=1e-12)


def test_c_star_composite_frozen():
    k = BilinearMaternKernel(2, nu=2.5)
    p = IsotropicGaussian(2, c0=1.0)
    assert_allclose(c_star(k, p, ZERO), 38.0 / 15.0, rtol=1e-12)


def test_c_star_matches_manual_composition(rng):
    for k in all_kernels(2):
        for p in all_potentials(2):
            for _ in range(10):
                z = rng.standard_normal(2) * 2.0
                manual = (
                    float(k.grad2_diag(z) @ p.grad(z))
                    + k.eval(z, z) * p.laplacian(z)
                    - k.laplacian2_diag(z)
                )
                assert_allclose(c_star(k, p, z), manual, rtol=1e-13)


def test_c_star_sup_exact_branches():
    k = GaussianKernel(2, h=1.0)
    assert c_star_sup(k, IsotropicGaussian(2, c0=1.0)) == 4.0
    p = DiagonalGaussian(2, scales=[0.5, 2.0], c0=1.0)
    assert_allclose(c_star_sup(k, p), 1.0 * (4.0 + 0.25) + 2.0, rtol=1e-13)


def test_c_star_sup_probe_branch_mixture():
    k = GaussianKernel(2, h=1.0)
    p = GaussianMixture(2, mu=1.5, c0=1.0)
    s1 = c_star_sup(k, p, probe_budget=10_000, seed=0)
    # sup Lap V = d (approached away from the modes), so sup C* = 4 here
    assert_allclose(s1, 4.0, rtol=1e-6)
    s2 = c_star_sup(k, p, probe_budget=100_000, seed=0)
    assert abs(s2 - s1) <= 0.01 * abs(s1)


def test_c_star_sup_accepts_trajectory_probes(rng):
    k = GaussianKernel(2, h=1.0)
    p = GaussianMixture(2, mu=1.5, c0=1.0)
    tr = integrate_continuous(k, p, rng.standard_normal((4, 2)), 0.5, dt=0.25)
    with_traj = c_star_sup(k, p, probe_budget=1000, seed=3, trajectory=tr)
    assert with_traj >= c_star_sup(k, p, probe_budget=1000, seed=3) - 1e-12


def test_c_star_sup_unbounded_kernel():
    assert c_star_sup(BilinearMaternKernel(2), IsotropicGaussian(2)) == math.inf


def test_c_star_sup_budget_validation():
    k = GaussianKernel(2, h=1.0)
    with pytest.raises(ValueError, match="probe_budget"):
        c_star_sup(k, GaussianMixture(2, mu=1.0), probe_budget=10)


# ---------------------------------------------------------------------------
# pooled measures
# ---------------------------------------------------------------------------


def test_time_average_pools_all_snapshots(rng):
    k = GaussianKernel(2, h=1.0)
    p = IsotropicGaussian(2, c0=1.0)
    tr = integrate_continuous(k, p, rng.standard_normal((5, 2)), 1.0, dt=0.25)
    pool = time_average(tr)
    assert pool.points.shape == (tr.n_snapshots * 5, 2)
    assert pool.arity == 1
    assert_allclose(pool.weights.sum(), 1.0, rtol=1e-12)
    assert pool.weights.min() == pool.weights.max()
    assert np.array_equal(pool.points[:5], tr.states[0])
    # window restriction drops early snapshots
    late = time_average(tr, t_lo=0.5)
    assert late.points.shape[0] < pool.points.shape[0]
    assert late.provenance["snapshots"] < pool.provenance["snapshots"]


def test_pair_pool_structure(rng):
    k = GaussianKernel(2, h=1.0)
    p = IsotropicGaussian(2, c0=1.0)
    tr = integrate_continuous(k, p, rng.standard_normal((6, 2)), 1.0, dt=0.25)
    pool = pair_pool(tr, pairs_per_snapshot=4, seed=5)
    assert pool.points.shape == (tr.n_snapshots * 4, 4)
    assert pool.arity == 2
    # ordered pairs never pair a particle with itself
    first, second = pool.points[:, :2], pool.points[:, 2:]
    assert np.all(np.any(first != second, axis=1))
    # deterministic in the seed
    again = pair_pool(tr, pairs_per_snapshot=4, seed=5)
    assert np.array_equal(pool.points, again.points)
    assert not np.array_equal(pool.points, pair_pool(tr, pairs_per_snapshot=4, seed=6).points)


def test_pair_pool_validation(rng):
    k = GaussianKernel(2, h=1.0)
    p = IsotropicGaussian(2, c0=1.0)
    tr1 = integrate_continuous(k, p, rng.standard_normal((1, 2)), 0.5, dt=0.25)
    with pytest.raises(ValueError):
        pair_pool(tr1)
    tr2 = integrate_continuous(k, p, rng.standard_normal((2, 2)), 0.5, dt=0.25)
    with pytest.raises(ValueError, match="pairs_per_snapshot"):
        pair_pool(tr2, pairs_per_snapshot=3)  # N(N-1) = 2
    pool = pair_pool(tr2, pairs_per_snapshot=2)
    assert pool.points.shape[1] == 4


# ---------------------------------------------------------------------------
# transport rate exponent
# ---------------------------------------------------------------------------


def test_w2_rate_exponent_frozen_values():
    assert_allclose(w2_rate_exponent(2, 2.5), 1.0 / 185.625, rtol=1e-12)
    assert_allclose(w2_rate_exponent(1, 2.5), 1.0 / 202.5, rtol=1e-12)


def test_w2_rate_exponent_asymptotics():
    r = w2_rate_exponent(1000, 2.5)
    assert abs(18.0 * 1000 * r - 1.0) <= 0.05


def test_w2_rate_exponent_monotone_beyond_two():
    vals = [w2_rate_exponent(d, 2.5) for d in range(2, 40)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert all(v > 0 for v in vals)
    # heavier smoothness slows the certified rate
    assert w2_rate_exponent(2, 3.5) < w2_rate_exponent(2, 2.5)


def test_w2_rate_exponent_validation():
    with pytest.raises(ValueError):
        w2_rate_exponent(0, 2.5)
    with pytest.raises(ValueError):
        w2_rate_exponent(2, 0.0)
