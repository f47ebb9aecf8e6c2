"""Compiled O(N^2) pair reductions behind the drift map and the discrepancy.

These loops are the only hot spots in the package, so they are numba-compiled
(nopython, fastmath OFF so float arithmetic stays IEEE-ordered, cache=True so
worker processes reuse the compiled artifacts).

Summation-order contract
------------------------
Callers pass particle arrays already sorted into the canonical (lexicographic
coordinate) order.  Within that order every reduction must be the plain
ascending-index left fold, i.e. row i accumulates contributions for
j = 0, 1, ..., N-1 with a single accumulator.  The triangle loops below visit
each unordered pair once but reproduce that fold bit for bit:

    for i:  acc[i] += term(i, i)
            for j in i+1..N-1:  acc[i] += term(i, j); acc[j] += term(j, i)

Row r receives term(r, 0) during outer iteration 0, term(r, 1) during outer
iteration 1, ..., term(r, r-1) during outer iteration r-1, then its own
diagonal term and term(r, r+1), ..., term(r, N-1) during outer iteration r --
exactly ascending j.  The flipped terms use the identities (x_j - x_i) =
-(x_i - x_j) and commutativity of float multiplication, both exact in IEEE
arithmetic, so term(j, i) carries the same bits a naive j-loop would produce.

The scalar V-statistic accumulators exploit u(x, y) = u(y, x) (exact bitwise
for every kernel here) and return diag + 2 * upper-triangle sums; the fold
order is a fixed function of the canonical order only.

Matern profiles enter through their elementary closed forms: with
r = ||Sigma z||, all of Psi, u = Psi'/r and w = (Psi'' - Psi'/r)/r^2 are
C e^{-r} times a short polynomial (selected by ``case``: 0 for nu = 5/2,
1 for nu = 7/2), smooth through r = 0.
"""

from __future__ import annotations

import numba
import numpy as np

_NJIT = dict(cache=True, fastmath=False, nogil=True)


@numba.njit(**_NJIT)
def _matern_uvw(r, cnorm, case):
    """Radial factors (psi, u, w) at radius r for the selected smoothness."""
    e = cnorm * np.exp(-r)
    if case == 0:
        psi = e * (r * r + 3.0 * r + 3.0)
        u = -e * (1.0 + r)
        w = e
    else:
        psi = e * (((r + 6.0) * r + 15.0) * r + 15.0)
        u = -e * ((r + 3.0) * r + 3.0)
        w = e * (1.0 + r)
    return psi, u, w


@numba.njit(**_NJIT)
def drift_gaussian(X, G, h):
    N, d = X.shape
    acc = np.zeros((N, d))
    inv_h = 1.0 / h
    for i in range(N):
        # j = i term: k = 1, grad2 k = 0
        for l in range(d):
            acc[i, l] += G[i, l]
        for j in range(i + 1, N):
            sq = 0.0
            for l in range(d):
                dl = X[i, l] - X[j, l]
                sq += dl * dl
            k = np.exp(-0.5 * sq * inv_h)
            for l in range(d):
                dl = X[i, l] - X[j, l]
                acc[i, l] += k * G[j, l] - (dl * inv_h) * k
                acc[j, l] += k * G[i, l] - (-dl * inv_h) * k
    return acc / N


@numba.njit(**_NJIT)
def drift_matern(X, G, s2, cnorm, case):
    N, d = X.shape
    acc = np.zeros((N, d))
    psi0, _, _ = _matern_uvw(0.0, cnorm, case)
    for i in range(N):
        for l in range(d):
            acc[i, l] += psi0 * G[i, l]
        for j in range(i + 1, N):
            rsq = 0.0
            for l in range(d):
                dl = X[i, l] - X[j, l]
                rsq += s2[l] * dl * dl
            r = np.sqrt(rsq)
            psi, u, _ = _matern_uvw(r, cnorm, case)
            for l in range(d):
                dl = X[i, l] - X[j, l]
                gp = u * s2[l] * dl  # (grad Psi)(x_i - x_j), component l
                # -grad2 k(x_i, x_j) = +grad Psi(delta); flipped sign for (j, i)
                acc[i, l] += psi * G[j, l] + gp
                acc[j, l] += psi * G[i, l] - gp
    return acc / N


@numba.njit(**_NJIT)
def drift_bilinear_matern(X, G, s2, cnorm, case):
    N, d = X.shape
    acc = np.zeros((N, d))
    psi0, _, _ = _matern_uvw(0.0, cnorm, case)
    for i in range(N):
        xi_sq = 0.0
        for l in range(d):
            xi_sq += X[i, l] * X[i, l]
        k_ii = 1.0 + xi_sq + psi0
        for l in range(d):
            # grad2 k(x, x) = x for the bilinear part, 0 for the profile
            acc[i, l] += k_ii * G[i, l] - X[i, l]
        for j in range(i + 1, N):
            rsq = 0.0
            dot = 0.0
            for l in range(d):
                dl = X[i, l] - X[j, l]
                rsq += s2[l] * dl * dl
                dot += X[i, l] * X[j, l]
            r = np.sqrt(rsq)
            psi, u, _ = _matern_uvw(r, cnorm, case)
            k = 1.0 + dot + psi
            for l in range(d):
                dl = X[i, l] - X[j, l]
                gp = u * s2[l] * dl
                # grad2 k(x_i, x_j) = x_i - grad Psi(delta)
                acc[i, l] += k * G[j, l] - X[i, l] + gp
                acc[j, l] += k * G[i, l] - X[j, l] - gp
    return acc / N


@numba.njit(**_NJIT)
def stein_vsum_gaussian(X, G, h):
    """Sum over all ordered pairs (i, j) of the Stein-kernel values u_P."""
    N, d = X.shape
    inv_h = 1.0 / h
    diag = 0.0
    off = 0.0
    for i in range(N):
        gg = 0.0
        for l in range(d):
            gg += G[i, l] * G[i, l]
        diag += gg + d * inv_h
        for j in range(i + 1, N):
            sq = 0.0
            gigj = 0.0
            cross = 0.0
            for l in range(d):
                dl = X[i, l] - X[j, l]
                sq += dl * dl
                gigj += G[i, l] * G[j, l]
                cross += dl * (G[j, l] - G[i, l])
            k = np.exp(-0.5 * sq * inv_h)
            off += k * (gigj + cross * inv_h + d * inv_h - sq * inv_h * inv_h)
    return diag + 2.0 * off


@numba.njit(**_NJIT)
def stein_vsum_matern(X, G, s2, cnorm, case):
    N, d = X.shape
    tr_s2 = 0.0
    for l in range(d):
        tr_s2 += s2[l]
    psi0, u0, _ = _matern_uvw(0.0, cnorm, case)
    lap0 = u0 * tr_s2
    diag = 0.0
    off = 0.0
    for i in range(N):
        gg = 0.0
        for l in range(d):
            gg += G[i, l] * G[i, l]
        diag += psi0 * gg - lap0
        for j in range(i + 1, N):
            rsq = 0.0
            gigj = 0.0
            for l in range(d):
                dl = X[i, l] - X[j, l]
                rsq += s2[l] * dl * dl
                gigj += G[i, l] * G[j, l]
            r = np.sqrt(rsq)
            psi, u, w = _matern_uvw(r, cnorm, case)
            cross = 0.0
            s4 = 0.0
            for l in range(d):
                dl = X[i, l] - X[j, l]
                gp = u * s2[l] * dl
                cross += gp * (G[i, l] - G[j, l])
                s4 += (s2[l] * dl) * (s2[l] * dl)
            lap = w * s4 + u * tr_s2
            off += psi * gigj + cross - lap
    return diag + 2.0 * off


@numba.njit(**_NJIT)
def stein_vsum_bilinear_matern(X, G, s2, cnorm, case):
    N, d = X.shape
    tr_s2 = 0.0
    for l in range(d):
        tr_s2 += s2[l]
    psi0, u0, _ = _matern_uvw(0.0, cnorm, case)
    lap0 = u0 * tr_s2
    diag = 0.0
    off = 0.0
    for i in range(N):
        gg = 0.0
        xx = 0.0
        gx = 0.0
        for l in range(d):
            gg += G[i, l] * G[i, l]
            xx += X[i, l] * X[i, l]
            gx += G[i, l] * X[i, l]
        diag += (1.0 + xx + psi0) * gg - 2.0 * gx + d - lap0
        for j in range(i + 1, N):
            rsq = 0.0
            dot = 0.0
            gigj = 0.0
            gixi = 0.0
            gjxj = 0.0
            for l in range(d):
                dl = X[i, l] - X[j, l]
                rsq += s2[l] * dl * dl
                dot += X[i, l] * X[j, l]
                gigj += G[i, l] * G[j, l]
                gixi += G[i, l] * X[i, l]
                gjxj += G[j, l] * X[j, l]
            r = np.sqrt(rsq)
            psi, u, w = _matern_uvw(r, cnorm, case)
            cross = 0.0
            s4 = 0.0
            for l in range(d):
                dl = X[i, l] - X[j, l]
                gp = u * s2[l] * dl
                cross += gp * (G[i, l] - G[j, l])
                s4 += (s2[l] * dl) * (s2[l] * dl)
            lap = w * s4 + u * tr_s2
            off += (1.0 + dot + psi) * gigj - gixi - gjxj + cross + d - lap
    return diag + 2.0 * off


def drift_sum(kernel, X, G):
    """Interaction-averaged drift (1/N) sum_j [k(x_i, x_j) G_j - grad2 k(x_i, x_j)].

    ``X`` and ``G`` must be float64 C-contiguous arrays already in canonical
    order; the result rows correspond to the rows of ``X``.
    """
    args = kernel._pair_args()
    if args[0] == "gaussian":
        return drift_gaussian(X, G, args[1])
    if args[0] == "matern":
        return drift_matern(X, G, args[1], args[2], args[3])
    return drift_bilinear_matern(X, G, args[1], args[2], args[3])


def stein_vsum(kernel, X, G):
    """Full double sum of the Stein kernel u_P over the ensemble (V-statistic)."""
    args = kernel._pair_args()
    if args[0] == "gaussian":
        return stein_vsum_gaussian(X, G, args[1])
    if args[0] == "matern":
        return stein_vsum_matern(X, G, args[1], args[2], args[3])
    return stein_vsum_bilinear_matern(X, G, args[1], args[2], args[3])


def warm_up():
    """Trigger JIT compilation of every pair loop on tiny inputs."""
    X = np.zeros((2, 1))
    G = np.zeros((2, 1))
    s2 = np.ones(1)
    drift_gaussian(X, G, 1.0)
    drift_matern(X, G, s2, 1.0, 0)
    drift_bilinear_matern(X, G, s2, 1.0, 1)
    stein_vsum_gaussian(X, G, 1.0)
    stein_vsum_matern(X, G, s2, 1.0, 1)
    stein_vsum_bilinear_matern(X, G, s2, 1.0, 0)
