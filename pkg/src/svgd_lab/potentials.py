"""Target potentials V with the growth/curvature metadata the theory consumes.

A potential object represents a target density pi proportional to exp(-V) and
carries, besides value/gradient/Laplacian evaluations (scalar and batched),
the certified constants used by the a-priori bounds:

* ``growth_A``, ``growth_alpha`` -- ||grad V(x)|| <= A V(x)^alpha everywhere;
* ``hessian_bound`` -- uniform operator-norm bound C_V on Hess V;
* ``dissipativity`` -- (a, b1, b0) with -<x, grad V(x)> <= -a ||x||^2 + b1 ||x|| + b0 - d;
* ``laplacian_sup`` -- sup_x Lap V(x) (finite for every family here);
* ``c0`` -- additive offset keeping inf V > 0.

Each family also knows how to draw exact reference samples from its own pi.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "IsotropicGaussian",
    "DiagonalGaussian",
    "GaussianMixture",
    "potential_from_config",
]


def _rng_of(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _as_points(X, dim):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("points contain non-finite coordinates")
    return X


class _PotentialBase:
    def value(self, x):
        return float(self.value_many(np.asarray(x, dtype=float)[None, :])[0])

    def grad(self, x):
        return self.grad_many(np.asarray(x, dtype=float)[None, :])[0]

    def laplacian(self, x):
        return float(self.laplacian_many(np.asarray(x, dtype=float)[None, :])[0])


class IsotropicGaussian(_PotentialBase):
    """V(x) = ||x||^2 / 2 + c0, target pi = N(0, I_d).

    The growth constant A = sqrt(2) is tight: ||grad V|| / sqrt(V) =
    ||x|| / sqrt(||x||^2/2 + c0) increases to sqrt(2) as ||x|| grows.
    """

    kind = "isotropic_gaussian"

    def __init__(self, dim, c0=1.0):
        if dim < 1:
            raise ValueError("dim must be a positive integer")
        if not (c0 > 0):
            raise ValueError("c0 must be positive")
        self.dim = int(dim)
        self.c0 = float(c0)
        self.growth_A = math.sqrt(2.0)
        self.growth_alpha = 0.5
        self.hessian_bound = 1.0
        self.dissipativity = (1.0, 0.0, float(dim))
        self.laplacian_sup = float(dim)

    def describe(self):
        return f"isotropic_gaussian(d={self.dim})"

    def value_many(self, X):
        X = _as_points(X, self.dim)
        return 0.5 * np.sum(X * X, axis=1) + self.c0

    def grad_many(self, X):
        return _as_points(X, self.dim).copy()

    def laplacian_many(self, X):
        X = _as_points(X, self.dim)
        return np.full(X.shape[0], float(self.dim))

    def sample_reference(self, n, seed):
        rng = _rng_of(seed)
        return rng.standard_normal((int(n), self.dim))


class DiagonalGaussian(_PotentialBase):
    """V(x) = sum_l x_l^2 / (2 s_l^2) + c0, target pi = N(0, diag(s^2))."""

    kind = "diagonal_gaussian"

    def __init__(self, dim, scales=None, c0=1.0):
        if dim < 1:
            raise ValueError("dim must be a positive integer")
        if not (c0 > 0):
            raise ValueError("c0 must be positive")
        if scales is None:
            scales = np.ones(dim)
        scales = np.asarray(scales, dtype=float)
        if scales.shape != (dim,):
            raise ValueError(f"scales has shape {scales.shape}, expected ({dim},)")
        if not np.all(scales > 0):
            raise ValueError("scales must be positive")
        self.dim = int(dim)
        self.c0 = float(c0)
        self.scales = scales
        self._inv_sq = 1.0 / scales**2
        s_min = float(np.min(scales))
        s_max = float(np.max(scales))
        # ||grad V||^2 = sum x_l^2/s_l^4 <= (1/s_min^2) * 2 (V - c0) <= (2/s_min^2) V
        self.growth_A = math.sqrt(2.0) / s_min
        self.growth_alpha = 0.5
        self.hessian_bound = 1.0 / s_min**2
        self.dissipativity = (1.0 / s_max**2, 0.0, float(dim))
        self.laplacian_sup = float(np.sum(self._inv_sq))

    def describe(self):
        return f"diagonal_gaussian(d={self.dim})"

    def value_many(self, X):
        X = _as_points(X, self.dim)
        return 0.5 * np.sum(X * X * self._inv_sq, axis=1) + self.c0

    def grad_many(self, X):
        return _as_points(X, self.dim) * self._inv_sq

    def laplacian_many(self, X):
        X = _as_points(X, self.dim)
        return np.full(X.shape[0], self.laplacian_sup)

    def sample_reference(self, n, seed):
        rng = _rng_of(seed)
        return rng.standard_normal((int(n), self.dim)) * self.scales


class GaussianMixture(_PotentialBase):
    """Symmetric two-component Gaussian mixture along the first axis.

    V(x) = c0 - log( (exp(-||x - m||^2/2) + exp(-||x + m||^2/2)) / 2 ) with
    m = mu e_1, evaluated in the overflow-safe form
    V = c0 + (||x||^2 + mu^2)/2 - logcosh(mu x_1).  For mu > 1 the target is
    genuinely bimodal and V is not convex.

    The growth constant is certified from ||grad V|| <= ||x|| + mu together
    with V >= c0 + (||x|| - mu)^2/2: splitting at ||x|| = 2 mu gives
    A = max(3 mu / sqrt(c0), 3 sqrt(2)) at alpha = 1/2.
    """

    kind = "gaussian_mixture"

    def __init__(self, dim, mu=1.0, c0=1.0):
        if dim < 1:
            raise ValueError("dim must be a positive integer")
        if not (c0 > 0):
            raise ValueError("c0 must be positive")
        mu = float(mu)
        if not (0.0 <= mu <= 2.0):
            raise ValueError(f"mixture separation mu must lie in [0, 2], got {mu}")
        self.dim = int(dim)
        self.c0 = float(c0)
        self.mu = mu
        self.growth_A = max(3.0 * mu / math.sqrt(c0), 3.0 * math.sqrt(2.0))
        self.growth_alpha = 0.5
        # Hess V = I - mu^2 sech^2(mu x_1) e_1 e_1^T, eigenvalues in [1 - mu^2, 1]
        self.hessian_bound = max(1.0, mu**2 - 1.0)
        self.dissipativity = (1.0, mu, float(dim))
        self.laplacian_sup = float(dim)

    def describe(self):
        return f"gaussian_mixture(d={self.dim}, mu={self.mu:g})"

    @staticmethod
    def _logcosh(t):
        a = np.abs(t)
        return a + np.log1p(np.exp(-2.0 * a)) - math.log(2.0)

    @staticmethod
    def _sech(t):
        a = np.abs(t)
        e = np.exp(-a)
        return 2.0 * e / (1.0 + e * e)

    def value_many(self, X):
        X = _as_points(X, self.dim)
        sq = np.sum(X * X, axis=1)
        return self.c0 + 0.5 * (sq + self.mu**2) - self._logcosh(self.mu * X[:, 0])

    def grad_many(self, X):
        X = _as_points(X, self.dim)
        G = X.copy()
        G[:, 0] -= self.mu * np.tanh(self.mu * X[:, 0])
        return G

    def laplacian_many(self, X):
        X = _as_points(X, self.dim)
        return self.dim - (self.mu * self._sech(self.mu * X[:, 0])) ** 2

    def sample_reference(self, n, seed):
        rng = _rng_of(seed)
        n = int(n)
        out = rng.standard_normal((n, self.dim))
        signs = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        out[:, 0] += self.mu * signs
        return out


def potential_from_config(cfg):
    """Build a potential from flat config keys (``potential.kind`` etc.)."""
    kind = cfg.get("potential.kind", "isotropic_gaussian")
    dim = int(cfg.get("potential.d", 2))
    c0 = float(cfg.get("potential.c0", 1.0))
    if kind == "isotropic_gaussian":
        return IsotropicGaussian(dim, c0=c0)
    if kind == "diagonal_gaussian":
        scales = cfg.get("potential.scales")
        if isinstance(scales, str):
            scales = [float(tok) for tok in scales.split(",") if tok.strip()]
        return DiagonalGaussian(dim, scales=scales, c0=c0)
    if kind == "gaussian_mixture":
        mu = float(cfg.get("potential.mixture_mu", 1.0))
        return GaussianMixture(dim, mu=mu, c0=c0)
    raise ValueError(f"unknown potential.kind {kind!r}")
