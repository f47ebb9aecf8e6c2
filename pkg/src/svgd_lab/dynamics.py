"""Finite-particle transport dynamics in discrete and continuous time.

The interaction drift for an ensemble x = (x_1, ..., x_N) is

    T_i(x) = (1/N) sum_j [ k(x_i, x_j) grad V(x_j) - grad2 k(x_i, x_j) ],

the discrete-time update is x_i <- x_i - eta T_i(x), and the continuous-time
flow is dx_i/dt = -T_i(x), integrated here with fixed-step Euler or classical
RK4.  The module also provides the power-law step-size schedule, rejection
initialization into sublevel sets of the mean potential, and the two a-priori
bounds (squared drift norm, squared Hilbert-Schmidt norm of the drift
Jacobian) used as zero-violation sanity rails.

Determinism and relabeling
--------------------------
All pair reductions run in a canonical order obtained by sorting particles
lexicographically by coordinates; results are scattered back to the caller's
labels.  Consequently ``svgd_map_T`` and ``discrete_step`` commute with
particle permutations *bitwise*, and every routine here is exactly
reproducible for fixed inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _pairops

__all__ = [
    "BlowUpError",
    "SchedulePlan",
    "Trajectory",
    "as_ensemble",
    "drift_phi",
    "svgd_map_T",
    "discrete_step",
    "integrate_continuous",
    "run_discrete",
    "schedule",
    "restricted_init",
    "lyapunov_f",
    "drift_norm_bound",
    "jacobian_hs_bound",
]

BLOWUP_THRESHOLD = 1e12


class BlowUpError(RuntimeError):
    """A trajectory left the numerical trust region (|coordinate| > 1e12)."""

    def __init__(self, step, time, particle):
        self.step = int(step)
        self.time = float(time)
        self.particle = int(particle)
        super().__init__(
            f"ensemble blew up at step {step} (t={time:g}), particle {particle}: "
            f"coordinate magnitude exceeded {BLOWUP_THRESHOLD:g}"
        )


def as_ensemble(X, dim=None):
    """Validate and return an (N, d) float64 ensemble array."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"ensemble must be a 2-d (N, d) array, got shape {X.shape}")
    if dim is not None and X.shape[1] != dim:
        raise ValueError(f"ensemble dimension {X.shape[1]} does not match {dim}")
    if not np.all(np.isfinite(X)):
        bad = np.argwhere(~np.isfinite(X))
        raise ValueError(f"ensemble has non-finite coordinates at (particle, axis) {bad[0]}")
    return X


def canonical_order(X):
    """Permutation sorting rows lexicographically (first coordinate primary)."""
    return np.lexsort(X.T[::-1])


def drift_phi(kernel, potential, z, w):
    """Two-point drift field Phi(z, w) = -k(z, w) grad V(w) + grad2 k(z, w)."""
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    return -kernel.eval(z, w) * potential.grad(w) + kernel.grad2(z, w)


def _drift_canonical(kernel, potential, X):
    """Drift T(x) computed in canonical order, scattered back to input labels."""
    order = canonical_order(X)
    Xs = np.ascontiguousarray(X[order])
    G = potential.grad_many(Xs)
    Ts = _pairops.drift_sum(kernel, Xs, np.ascontiguousarray(G))
    out = np.empty_like(Ts)
    out[order] = Ts
    return out


def svgd_map_T(kernel, potential, ensemble):
    """Interaction drift T(x) for the whole ensemble, shape (N, d).

    The update map is x - eta * T(x); the continuous-time velocity is -T(x).
    """
    X = as_ensemble(ensemble, kernel.dim)
    if potential.dim != kernel.dim:
        raise ValueError(
            f"kernel dimension {kernel.dim} does not match potential dimension {potential.dim}"
        )
    T = _drift_canonical(kernel, potential, X)
    if not np.all(np.isfinite(T)):
        bad = np.argwhere(~np.isfinite(T))
        raise FloatingPointError(
            f"non-finite drift for particle {bad[0][0]} (axis {bad[0][1]})"
        )
    return T


def discrete_step(kernel, potential, ensemble, eta):
    """One discrete-time update x - eta * T(x)."""
    if not (eta >= 0) or not math.isfinite(eta):
        raise ValueError(f"step size eta must be finite and >= 0, got {eta}")
    X = as_ensemble(ensemble, kernel.dim)
    return X - eta * svgd_map_T(kernel, potential, X)


@dataclass
class Trajectory:
    """Recorded snapshots of a particle run.

    ``step_indices`` are the integer step counts at which states were stored
    (always including 0; every index is a multiple of ``stride``); ``times``
    are the matching physical times (step * dt in continuous mode, the step
    count itself in discrete mode).  ``states`` has shape (S, N, d) in the
    caller's particle labels.  ``mean_potential`` and ``second_moment`` are
    cached per snapshot; further per-snapshot series (e.g. the kernel Stein
    discrepancy) can be attached under ``extras``.
    """

    mode: str
    dt: float
    stride: int
    step_indices: np.ndarray
    times: np.ndarray
    states: np.ndarray
    mean_potential: np.ndarray
    second_moment: np.ndarray
    extras: dict = field(default_factory=dict)

    @property
    def n_snapshots(self):
        return self.states.shape[0]

    @property
    def n_particles(self):
        return self.states.shape[1]

    @property
    def dim(self):
        return self.states.shape[2]

    def window(self, t_lo, t_hi):
        """Indices of snapshots with time in [t_lo, t_hi] (inclusive, fuzzed)."""
        eps = 1e-9 * max(1.0, abs(t_hi))
        sel = np.nonzero((self.times >= t_lo - eps) & (self.times <= t_hi + eps))[0]
        if sel.size == 0:
            raise ValueError(f"no snapshots recorded in time window [{t_lo}, {t_hi}]")
        return sel


def _check_blowup(X, step, time):
    m = np.max(np.abs(X))
    if not (m <= BLOWUP_THRESHOLD):
        bad = np.argwhere(~(np.abs(X) <= BLOWUP_THRESHOLD))
        raise BlowUpError(step, time, bad[0][0])


def _record(snaps, potential, X, inv_order):
    state = X[inv_order] if inv_order is not None else X
    snaps["states"].append(state.copy())
    snaps["mean_potential"].append(float(np.mean(potential.value_many(X))))
    snaps["second_moment"].append(float(np.mean(np.sum(X * X, axis=1))))


def _finish(snaps, mode, dt, stride, indices):
    idx = np.asarray(indices, dtype=np.int64)
    times = idx * dt if mode == "continuous" else idx.astype(float)
    return Trajectory(
        mode=mode,
        dt=float(dt),
        stride=int(stride),
        step_indices=idx,
        times=times,
        states=np.asarray(snaps["states"]),
        mean_potential=np.asarray(snaps["mean_potential"]),
        second_moment=np.asarray(snaps["second_moment"]),
    )


def integrate_continuous(
    kernel,
    potential,
    ensemble,
    t_end,
    dt=0.05,
    method="rk4",
    snapshot_stride=None,
):
    """Integrate dx/dt = -T(x) from 0 to (approximately) ``t_end``.

    Fixed-step integration with ``n_steps = floor(t_end / dt)`` so the final
    time lands within one step of ``t_end`` (exactly on it when t_end is a
    multiple of dt).  Snapshots are recorded every ``snapshot_stride`` steps
    (default: max(1, n_steps // 512)), always including step 0.

    Raises ``BlowUpError`` as soon as any coordinate magnitude exceeds 1e12.
    """
    if method not in ("rk4", "euler"):
        raise ValueError(f"unknown integration method {method!r}")
    if not (dt > 0) or not math.isfinite(dt):
        raise ValueError(f"dt must be positive and finite, got {dt}")
    if not (t_end >= 0) or not math.isfinite(t_end):
        raise ValueError(f"t_end must be finite and >= 0, got {t_end}")
    X = as_ensemble(ensemble, kernel.dim)
    n_steps = int(math.floor(t_end / dt + 1e-9))
    stride = int(snapshot_stride) if snapshot_stride else max(1, n_steps // 512)
    if stride < 1:
        raise ValueError("snapshot_stride must be >= 1")

    # Canonical order fixed from the initial state: the reduction order is a
    # function of the point set only, never of the caller's labels.
    order = canonical_order(X)
    inv = np.empty_like(order)
    inv[order] = np.arange(order.size)
    X = np.ascontiguousarray(X[order])

    def F(state):
        G = potential.grad_many(state)
        return -_pairops.drift_sum(kernel, state, G)

    snaps = {"states": [], "mean_potential": [], "second_moment": []}
    indices = [0]
    _record(snaps, potential, X, inv)
    for n in range(1, n_steps + 1):
        if method == "euler":
            X = X + dt * F(X)
        else:
            k1 = F(X)
            k2 = F(X + (0.5 * dt) * k1)
            k3 = F(X + (0.5 * dt) * k2)
            k4 = F(X + dt * k3)
            X = X + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _check_blowup(X, n, n * dt)
        if n % stride == 0:
            indices.append(n)
            _record(snaps, potential, X, inv)
    return _finish(snaps, "continuous", dt, stride, indices)


def run_discrete(kernel, potential, ensemble, eta, n_iterations, snapshot_stride=None):
    """Iterate the discrete update x <- x - eta T(x) for ``n_iterations`` steps."""
    if not (eta >= 0) or not math.isfinite(eta):
        raise ValueError(f"step size eta must be finite and >= 0, got {eta}")
    n_iterations = int(n_iterations)
    if n_iterations < 0:
        raise ValueError("n_iterations must be >= 0")
    X = as_ensemble(ensemble, kernel.dim)
    stride = int(snapshot_stride) if snapshot_stride else max(1, n_iterations // 512)

    order = canonical_order(X)
    inv = np.empty_like(order)
    inv[order] = np.arange(order.size)
    X = np.ascontiguousarray(X[order])

    snaps = {"states": [], "mean_potential": [], "second_moment": []}
    indices = [0]
    _record(snaps, potential, X, inv)
    for n in range(1, n_iterations + 1):
        G = potential.grad_many(X)
        X = X - eta * _pairops.drift_sum(kernel, X, G)
        _check_blowup(X, n, float(n))
        if n % stride == 0:
            indices.append(n)
            _record(snaps, potential, X, inv)
    return _finish(snaps, "discrete", 1.0, stride, indices)


@dataclass(frozen=True)
class SchedulePlan:
    """Step size and iteration count from the power-law small-step rule."""

    eta: float
    n_iterations: int
    a: float
    alpha: float
    K: float
    N: int
    dim: int


def schedule(a, alpha, K, d, N):
    """Power-law step-size rule.

    eta = a * (d^((1+alpha)/(2(1-alpha))) + sqrt(d) K^alpha + d)^(-1)
            * N^(-(1+alpha)/(1-alpha)),
    T   = ceil(N^(2/(1-alpha))).

    Valid for alpha in [0, 1/2]; a, K positive; N, d positive integers.
    """
    if not (0.0 <= alpha <= 0.5):
        raise ValueError(f"alpha must lie in [0, 1/2], got {alpha}")
    if not (a > 0) or not (K > 0):
        raise ValueError("a and K must be positive")
    N = int(N)
    d = int(d)
    if N < 1 or d < 1:
        raise ValueError("N and d must be positive integers")
    expo = (1.0 + alpha) / (1.0 - alpha)
    denom = d ** (expo / 2.0) + math.sqrt(d) * K**alpha + d
    eta = a / denom * N ** (-expo)
    t_raw = N ** (2.0 / (1.0 - alpha))
    # guard against float dust just below an integer power
    t_round = round(t_raw)
    if abs(t_raw - t_round) <= 1e-9 * max(1.0, t_raw):
        n_iter = int(t_round)
    else:
        n_iter = int(math.ceil(t_raw))
    return SchedulePlan(
        eta=eta, n_iterations=n_iter, a=float(a), alpha=float(alpha), K=float(K), N=N, dim=d
    )


def restricted_init(potential, base_sampler, K, N, seed, max_attempts=1000):
    """Draw whole ensembles from ``base_sampler`` until mean potential <= K.

    ``base_sampler(N, rng)`` must return an (N, d) array.  Returns
    ``(ensemble, attempts)``.  Deterministic given ``seed``.  Raises
    RuntimeError when the attempt budget is exhausted (the fix is a larger K
    or a base initializer better matched to the sublevel set).
    """
    if not (K > 0):
        raise ValueError("K must be positive")
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    for attempt in range(1, int(max_attempts) + 1):
        X = as_ensemble(base_sampler(N, rng), potential.dim)
        if np.mean(potential.value_many(X)) <= K:
            return X, attempt
    raise RuntimeError(
        f"restricted_init exhausted {max_attempts} attempts without mean potential <= {K}; "
        "increase K or use a tighter base initializer"
    )


def lyapunov_f(potential, ensemble):
    """Mean potential f(x) = (1/N) sum_i V(x_i)."""
    X = as_ensemble(ensemble, potential.dim)
    return float(np.mean(potential.value_many(X)))


def drift_norm_bound(kernel, potential, ensemble):
    """Observed ||T(x)||^2 (Frobenius) and its a-priori bound.

    bound = 2 A^2 B^2 N f^(2 alpha) + 2 N B^2 d, with f the mean potential,
    (A, alpha) the potential growth constants and B the kernel derivative
    bound.  Returns ``(observed, bound)``.
    """
    B = kernel.derivative_bound
    if not math.isfinite(B):
        raise ValueError(
            f"kernel {kernel.describe()} has no finite derivative bound; "
            "the drift norm bound only applies to bounded kernels"
        )
    X = as_ensemble(ensemble, kernel.dim)
    N, d = X.shape
    T = svgd_map_T(kernel, potential, X)
    observed = float(np.sum(T * T))
    f = lyapunov_f(potential, X)
    A = potential.growth_A
    alpha = potential.growth_alpha
    bound = 2.0 * A**2 * B**2 * N * f ** (2.0 * alpha) + 2.0 * N * B**2 * d
    return observed, bound


def jacobian_hs_bound(kernel, potential, ensemble, fd_step=1e-5):
    """Observed squared Hilbert-Schmidt norm of the drift Jacobian and its bound.

    The Jacobian of the stacked map x -> T(x) (an (N d) x (N d) matrix) is
    estimated by central differences with step ``fd_step``; the bound is

        4 [ 2 A^2 B^2 d (N + 2) f^(2 alpha) + 2 B^2 d^2 (N + 3) + 2 B^2 d C_V^2 ].

    Returns ``(observed, bound)``.  Quadratic cost in N d; refuse huge inputs.
    """
    B = kernel.derivative_bound
    if not math.isfinite(B):
        raise ValueError(
            f"kernel {kernel.describe()} has no finite derivative bound; "
            "the Jacobian bound only applies to bounded kernels"
        )
    X = as_ensemble(ensemble, kernel.dim)
    N, d = X.shape
    if N * d > 256:
        raise ValueError(f"jacobian_hs_bound limited to N*d <= 256, got {N * d}")
    if not (fd_step > 0):
        raise ValueError("fd_step must be positive")
    hs_sq = 0.0
    for j in range(N):
        for l in range(d):
            Xp = X.copy()
            Xm = X.copy()
            Xp[j, l] += fd_step
            Xm[j, l] -= fd_step
            col = (svgd_map_T(kernel, potential, Xp) - svgd_map_T(kernel, potential, Xm)) / (
                2.0 * fd_step
            )
            hs_sq += float(np.sum(col * col))
    f = lyapunov_f(potential, X)
    A = potential.growth_A
    alpha = potential.growth_alpha
    C_V = potential.hessian_bound
    bound = 4.0 * (
        2.0 * A**2 * B**2 * d * (N + 2) * f ** (2.0 * alpha)
        + 2.0 * B**2 * d**2 * (N + 3)
        + 2.0 * B**2 * d * C_V**2
    )
    return hs_sq, bound
