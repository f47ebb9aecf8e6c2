"""Exact Wasserstein distances between equal-size empirical measures.

For two point sets of common size n, W_s (s in {1, 2}) reduces to an optimal
assignment problem: W_s^s = min over permutations of (1/n) sum ||a_i -
b_sigma(i)||^s.  In one dimension the optimum is the sorted (rank) pairing;
in general dimension it is solved exactly with the Jonker-Volgenant solver
from scipy.  ``subsample`` thins pooled measures to a common comparison size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

__all__ = ["CouplingResult", "wasserstein_1d", "wasserstein_assign", "subsample"]

MAX_ASSIGN_SIZE = 4096


@dataclass(frozen=True)
class CouplingResult:
    """Distance value plus the optimal pairing that realizes it."""

    distance: float
    order: int
    assignment: np.ndarray | None = None


def _as_sample(x, name):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError(f"{name} must be a nonempty 1-d or 2-d array, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x


def wasserstein_1d(a, b, order=2):
    """Exact W_s between two equal-size scalar samples via rank pairing."""
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size or a.size == 0:
        raise ValueError(f"samples must share a positive size, got {a.size} and {b.size}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("samples contain non-finite values")
    diff = np.abs(np.sort(a) - np.sort(b))
    if order == 1:
        return float(np.mean(diff))
    return float(np.sqrt(np.mean(diff * diff)))


def wasserstein_assign(a, b, order=2):
    """Exact W_s between equal-size d-dimensional samples via optimal assignment.

    Returns a ``CouplingResult`` whose ``assignment`` array sigma pairs row i
    of ``a`` with row sigma[i] of ``b``.  Cost is O(n^3); inputs are capped at
    n = 4096 points.
    """
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    A = _as_sample(a, "a")
    B = _as_sample(b, "b")
    if A.shape != B.shape:
        raise ValueError(f"samples must have identical shapes, got {A.shape} and {B.shape}")
    n = A.shape[0]
    if n > MAX_ASSIGN_SIZE:
        raise ValueError(f"assignment solver capped at {MAX_ASSIGN_SIZE} points, got {n}")
    diff = A[:, None, :] - B[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    cost = dist if order == 1 else dist * dist
    rows, cols = linear_sum_assignment(cost)
    sigma = np.empty(n, dtype=np.int64)
    sigma[rows] = cols
    total = float(cost[rows, cols].sum()) / n
    value = total if order == 1 else float(np.sqrt(total))
    return CouplingResult(distance=value, order=int(order), assignment=sigma)


def subsample(sample, n, seed):
    """Uniform subsample of ``n`` rows without replacement, in pool order.

    Selected row indices are sorted ascending, so asking for the whole pool
    returns it unchanged; two calls with the same seed agree exactly.
    """
    X = _as_sample(sample, "sample")
    n = int(n)
    if not (1 <= n <= X.shape[0]):
        raise ValueError(f"subsample size must lie in [1, {X.shape[0]}], got {n}")
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    idx = np.sort(rng.choice(X.shape[0], size=n, replace=False))
    return X[idx]
