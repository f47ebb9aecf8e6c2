"""Experiment harness: seeded sweeps over ensemble sizes with rate fits.

An experiment is described by a flat config (see ``config``), names one of
six kinds, and produces two artifacts in the output directory:

* ``<name>.metrics.jsonl`` -- one JSON object per (N, replicate), fields
  {experiment, N, replicate, seed, metric_name, value, wall_time_s, blowup}.
  This file is byte-identical across reruns with the same config and master
  seed, independent of the worker count; to keep that guarantee the
  wall_time_s field is a deterministic 0.0 placeholder (measured timing lives
  in the summary, outside the determinism contract).
* ``<name>.summary.json`` -- config hash, content version, per-replicate
  seeds, per-N medians/quartiles, the log-log fit, and the pass/fail verdict
  for the kind's acceptance rule.

Replicate seeds are derived via SeedSequence(master_seed, spawn_key=(N,
replicate)), so every (N, replicate) cell has an independent, reproducible
stream no matter how work is scheduled.  A completed run whose stored config
hash matches is never recomputed (``force=True`` overrides).
"""

from __future__ import annotations

import json
import math
import multiprocessing
import os
import time
from dataclasses import dataclass

import numpy as np

from . import _pairops
from .config import ConfigError, config_hash, content_version, get_typed, parse_flat_config
from .dynamics import (
    BlowUpError,
    integrate_continuous,
    restricted_init,
    run_discrete,
    schedule,
)
from .kernels import GaussianKernel, kernel_from_config
from .potentials import potential_from_config
from .stein import ksd_over_trajectory, ksd_squared, pair_pool, time_average
from .transport import subsample, wasserstein_assign

__all__ = [
    "EXPERIMENT_KINDS",
    "RateFit",
    "ExperimentResult",
    "fit_loglog",
    "derive_seed",
    "median_bandwidth",
    "run_experiment",
]

EXPERIMENT_KINDS = (
    "ksd_rate_ct",
    "ksd_rate_dt",
    "iid_baseline",
    "w2_trend",
    "poc_trend",
    "moment_bound",
)

_METRIC_NAMES = {
    "ksd_rate_ct": "time_avg_ksd2",
    "ksd_rate_dt": "iter_avg_ksd2",
    "iid_baseline": "ksd2",
    "w2_trend": "w2_time_avg_vs_ref",
    "poc_trend": "w1_pair_pool_vs_product",
    "moment_bound": "time_avg_second_moment",
}

# every key a config may set; anything else is rejected with a pointer here
_KNOWN_KEYS = {
    "experiment.kind",
    "experiment.name",
    "experiment.n_grid",
    "experiment.replicates",
    "experiment.eta_hor",
    "experiment.subsample_n",
    "experiment.pairs_per_snapshot",
    "experiment.workers",
    "seed",
    "kernel.kind",
    "kernel.h",
    "kernel.nu",
    "kernel.sigma_diag",
    "potential.kind",
    "potential.d",
    "potential.c0",
    "potential.mixture_mu",
    "potential.scales",
    "dynamics.mode",
    "dynamics.dt",
    "dynamics.t_end",
    "dynamics.method",
    "dynamics.eta",
    "dynamics.alpha",
    "dynamics.K",
    "dynamics.a",
    "init.kind",
    "init.scale",
    "output.dir",
    "criterion.slope_min",
    "criterion.slope_max",
    "criterion.r2_min",
    "criterion.max_abs_slope",
}

_MODE_OF_KIND = {
    "ksd_rate_ct": "continuous",
    "moment_bound": "continuous",
    "w2_trend": "continuous",
    "poc_trend": "continuous",
    "ksd_rate_dt": "discrete",
    "iid_baseline": None,
}


@dataclass(frozen=True)
class RateFit:
    """Least-squares line through (log N, log metric)."""

    slope: float
    intercept: float
    r_squared: float
    n_points: int


@dataclass
class ExperimentResult:
    summary: dict
    metrics_path: str
    summary_path: str
    resumed: bool

    @property
    def passed(self):
        return bool(self.summary["pass"])

    @property
    def fit(self):
        f = self.summary.get("fit")
        if f is None:
            return None
        return RateFit(f["slope"], f["intercept"], f["r_squared"], f["n_points"])

    @property
    def exit_code(self):
        if self.summary.get("quota_exceeded"):
            return 4
        return 0 if self.passed else 2


def fit_loglog(points):
    """OLS fit of log(value) against log(N).

    ``points`` is a sequence of (N, value) with N >= 1 and value > 0; at
    least 3 points are required.  Returns a ``RateFit``.  A constant series
    fits exactly (slope 0, r_squared 1).
    """
    pts = [(int(n), float(v)) for n, v in points]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points for a rate fit, got {len(pts)}")
    for n, v in pts:
        if n < 1:
            raise ValueError(f"ensemble size must be >= 1, got {n}")
        if not (v > 0) or not math.isfinite(v):
            raise ValueError(f"metric must be positive and finite to fit logs, got {v} at N={n}")
    x = np.log([n for n, _ in pts])
    y = np.log([v for _, v in pts])
    xm = x - x.mean()
    denom = float(xm.dot(xm))
    if denom == 0.0:
        raise ValueError("all N values identical; cannot fit a rate")
    slope = float(xm.dot(y - y.mean()) / denom)
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    ss_res = float(resid.dot(resid))
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r_squared = 1.0 if ss_tot <= 1e-300 else 1.0 - ss_res / ss_tot
    return RateFit(slope=slope, intercept=intercept, r_squared=r_squared, n_points=len(pts))


def derive_seed(master_seed, N, replicate):
    """64-bit replicate seed from the master seed and the (N, replicate) cell."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(N), int(replicate)))
    return int(ss.generate_state(1, np.uint64)[0])


def median_bandwidth(X):
    """Median pairwise squared distance over 2 (gaussian kernel heuristic)."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if n < 2:
        raise ValueError("median bandwidth needs at least 2 points")
    iu = np.triu_indices(n, k=1)
    sq = np.sum((X[iu[0]] - X[iu[1]]) ** 2, axis=1)
    h = float(np.median(sq)) / 2.0
    return max(h, 1e-12)


def _validate_cfg(cfg):
    unknown = sorted(set(cfg) - _KNOWN_KEYS)
    if unknown:
        raise ConfigError(
            f"unknown config keys {unknown}; known keys are listed in svgd_lab.harness"
        )
    kind = get_typed(cfg, "experiment.kind", "str", required=True)
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(f"experiment.kind must be one of {EXPERIMENT_KINDS}, got {kind!r}")
    n_grid = get_typed(cfg, "experiment.n_grid", "int_list", required=True)
    if len(n_grid) < 1 or any(n < 1 for n in n_grid):
        raise ConfigError("experiment.n_grid must list positive integers")
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ConfigError("experiment.n_grid must be strictly increasing")
    replicates = get_typed(cfg, "experiment.replicates", "int", default=1)
    if replicates < 1:
        raise ConfigError("experiment.replicates must be >= 1")
    get_typed(cfg, "seed", "int", required=True)
    mode = get_typed(cfg, "dynamics.mode", "str")
    want = _MODE_OF_KIND[kind]
    if mode is not None and want is not None and mode != want:
        raise ConfigError(f"experiment.kind {kind} runs in {want} time, but dynamics.mode={mode}")
    init_kind = get_typed(cfg, "init.kind", "str", default="gaussian")
    if init_kind != "gaussian":
        raise ConfigError(f"init.kind must be 'gaussian' (product normal), got {init_kind!r}")
    method = get_typed(cfg, "dynamics.method", "str", default="rk4")
    if method not in ("rk4", "euler"):
        raise ConfigError(f"dynamics.method must be rk4 or euler, got {method!r}")
    try:
        potential_from_config(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if get_typed(cfg, "kernel.h", "str", default="1.0") != "median":
        try:
            kernel_from_config(cfg, int(cfg.get("potential.d", 2)))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    elif cfg.get("kernel.kind", "gaussian") != "gaussian":
        raise ConfigError("kernel.h = median is only supported for the gaussian kernel")
    return kind, n_grid, replicates


def _build_models(cfg, X0=None):
    potential = potential_from_config(cfg)
    if cfg.get("kernel.h") == "median":
        if X0 is None:
            raise ConfigError("median bandwidth requires an initial ensemble")
        kernel = GaussianKernel(potential.dim, h=median_bandwidth(X0))
    else:
        kernel = kernel_from_config(cfg, potential.dim)
    return kernel, potential


def _horizon(cfg, kind, N):
    t_end = get_typed(cfg, "dynamics.t_end", "float")
    if t_end is not None:
        return t_end
    if kind in ("ksd_rate_ct", "moment_bound"):
        return float(N)
    eta_hor = get_typed(cfg, "experiment.eta_hor", "float", default=0.1)
    raw = float(N) ** (2.0 + eta_hor)
    return float(math.ceil(raw - 1e-9))


def _run_replicate(payload):
    """One (N, replicate) cell; returns a plain dict (multiprocessing-safe)."""
    cfg = payload["cfg"]
    kind = payload["kind"]
    N = payload["N"]
    seed = payload["seed"]
    rng = np.random.default_rng(seed)
    d = int(cfg.get("potential.d", 2))
    scale = get_typed(cfg, "init.scale", "float", default=2.0)
    dt = get_typed(cfg, "dynamics.dt", "float", default=0.05)
    method = get_typed(cfg, "dynamics.method", "str", default="rk4")
    extra = {}
    try:
        if kind == "iid_baseline":
            potential = potential_from_config(cfg)
            X = potential.sample_reference(N, rng)
            kernel, potential = _build_models(cfg, X)
            value = ksd_squared(kernel, potential, X).ksd2
        elif kind == "ksd_rate_dt":
            potential = potential_from_config(cfg)
            alpha = get_typed(cfg, "dynamics.alpha", "float", default=0.5)
            a = get_typed(cfg, "dynamics.a", "float", default=1.0)
            K = get_typed(cfg, "dynamics.K", "float")
            if K is None:
                K = d / 2.0 + potential.c0 + 1.0
            plan = schedule(a, alpha, K, d, N)
            eta = get_typed(cfg, "dynamics.eta", "float", default=plan.eta)
            X0, attempts = restricted_init(
                potential,
                lambda n, g: scale * g.standard_normal((n, d)),
                K,
                N,
                rng,
            )
            extra["init_attempts"] = attempts
            kernel, potential = _build_models(cfg, X0)
            traj = run_discrete(kernel, potential, X0, eta, plan.n_iterations)
            value = float(np.mean(ksd_over_trajectory(kernel, potential, traj)))
            extra["eta"] = eta
            extra["n_iterations"] = plan.n_iterations
        else:
            X0 = scale * rng.standard_normal((N, d))
            kernel, potential = _build_models(cfg, X0)
            t_end = _horizon(cfg, kind, N)
            traj = integrate_continuous(kernel, potential, X0, t_end, dt=dt, method=method)
            if kind == "ksd_rate_ct":
                value = float(np.mean(ksd_over_trajectory(kernel, potential, traj)))
            elif kind == "moment_bound":
                value = float(np.mean(traj.second_moment))
            elif kind == "w2_trend":
                pool = time_average(traj)
                n_sub = get_typed(cfg, "experiment.subsample_n", "int", default=512)
                m = min(n_sub, pool.points.shape[0])
                sub = subsample(pool.points, m, int(rng.integers(2**63)))
                ref = potential.sample_reference(m, rng)
                value = wasserstein_assign(sub, ref, order=2).distance
            elif kind == "poc_trend":
                pps = get_typed(cfg, "experiment.pairs_per_snapshot", "int", default=4)
                pairs = pair_pool(traj, pairs_per_snapshot=pps, seed=int(rng.integers(2**63)))
                n_sub = get_typed(cfg, "experiment.subsample_n", "int", default=512)
                m = min(n_sub, pairs.points.shape[0])
                sub = subsample(pairs.points, m, int(rng.integers(2**63)))
                flat = potential.sample_reference(2 * m, rng)
                ref = flat.reshape(m, 2 * d)
                value = wasserstein_assign(sub, ref, order=1).distance
            else:  # pragma: no cover - guarded by _validate_cfg
                raise ConfigError(f"unhandled experiment kind {kind}")
    except BlowUpError as exc:
        return {
            "N": N,
            "replicate": payload["replicate"],
            "seed": seed,
            "value": None,
            "blowup": True,
            "extra": {"blowup_step": exc.step},
        }
    return {
        "N": N,
        "replicate": payload["replicate"],
        "seed": seed,
        "value": float(value),
        "blowup": False,
        "extra": extra,
    }


def _criterion(cfg, kind, fit, medians):
    """Return (description, passed) for the kind's acceptance rule."""
    if kind in ("ksd_rate_ct", "iid_baseline"):
        lo_default, hi_default = (-1.35, -0.65) if kind == "ksd_rate_ct" else (-1.25, -0.75)
        lo = get_typed(cfg, "criterion.slope_min", "float", default=lo_default)
        hi = get_typed(cfg, "criterion.slope_max", "float", default=hi_default)
        r2_min = get_typed(
            cfg, "criterion.r2_min", "float", default=0.9 if kind == "ksd_rate_ct" else None
        )
        desc = f"slope in [{lo:g}, {hi:g}]" + (f" and r_squared >= {r2_min:g}" if r2_min else "")
        if fit is None:
            return desc, False
        ok = lo <= fit.slope <= hi and (r2_min is None or fit.r_squared >= r2_min)
        return desc, bool(ok)
    if kind == "moment_bound":
        cap = get_typed(cfg, "criterion.max_abs_slope", "float", default=0.2)
        desc = f"|slope| <= {cap:g}"
        return desc, bool(fit is not None and abs(fit.slope) <= cap)
    # trend kinds: medians strictly decreasing in N
    desc = "median metric strictly decreasing along n_grid"
    vals = [m for _, m in medians]
    ok = len(vals) >= 2 and all(b < a for a, b in zip(vals, vals[1:]))
    return desc, bool(ok)


def _write_metrics(path, kind, metric_name, rows):
    lines = []
    for row in rows:
        obj = {
            "experiment": kind,
            "N": int(row["N"]),
            "replicate": int(row["replicate"]),
            "seed": int(row["seed"]),
            "metric_name": metric_name,
            "value": None if row["value"] is None else float(row["value"]),
            "wall_time_s": 0.0,
            "blowup": bool(row["blowup"]),
        }
        lines.append(json.dumps(obj, separators=(", ", ": ")))
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def run_experiment(cfg_or_path, workers=None, force=False, out_dir=None, raw_text=None):
    """Run (or resume) one experiment described by a config.

    Accepts a config file path or a parsed {key: value} dict.  Returns an
    ``ExperimentResult`` carrying the summary dict, artifact paths, and exit
    semantics (0 pass, 2 criterion failed, 4 failure quota exceeded).
    """
    if isinstance(cfg_or_path, (str, os.PathLike)):
        path = os.fspath(cfg_or_path)
        with open(path, "r", encoding="utf-8") as fh:
            raw_text = fh.read()
        cfg = parse_flat_config(raw_text)
    else:
        cfg = dict(cfg_or_path)
        if raw_text is None:
            raw_text = "\n".join(f"{k} = {cfg[k]}" for k in cfg) + "\n"
    kind, n_grid, replicates = _validate_cfg(cfg)
    name = cfg.get("experiment.name", kind)
    master_seed = get_typed(cfg, "seed", "int", required=True)
    chash = config_hash(cfg)
    cversion = content_version(raw_text)
    metric_name = _METRIC_NAMES[kind]

    directory = out_dir if out_dir is not None else cfg.get("output.dir", "results")
    os.makedirs(directory, exist_ok=True)
    metrics_path = os.path.join(directory, f"{name}.metrics.jsonl")
    summary_path = os.path.join(directory, f"{name}.summary.json")

    if not force and os.path.exists(summary_path) and os.path.exists(metrics_path):
        try:
            with open(summary_path, "r", encoding="utf-8") as fh:
                old = json.load(fh)
        except (OSError, json.JSONDecodeError):
            old = None
        if old is not None and old.get("config_hash") == chash:
            return ExperimentResult(
                summary=old, metrics_path=metrics_path, summary_path=summary_path, resumed=True
            )

    _pairops.warm_up()
    if workers is None:
        workers = get_typed(cfg, "experiment.workers", "int", default=1)
    workers = max(1, int(workers))

    payloads = [
        {
            "cfg": cfg,
            "kind": kind,
            "N": N,
            "replicate": r,
            "seed": derive_seed(master_seed, N, r),
        }
        for N in n_grid
        for r in range(replicates)
    ]
    t0 = time.perf_counter()
    if workers == 1:
        rows = [_run_replicate(p) for p in payloads]
    else:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(processes=workers) as pool:
            rows = pool.map(_run_replicate, payloads, chunksize=1)
    elapsed = time.perf_counter() - t0
    rows.sort(key=lambda row: (row["N"], row["replicate"]))
    _write_metrics(metrics_path, kind, metric_name, rows)

    per_level = []
    medians = []
    for N in n_grid:
        cell = [r for r in rows if r["N"] == N]
        good = [r["value"] for r in cell if not r["blowup"]]
        level = {
            "N": int(N),
            "values": [None if r["blowup"] else float(r["value"]) for r in cell],
            "seeds": [int(r["seed"]) for r in cell],
            "blowups": int(sum(r["blowup"] for r in cell)),
        }
        if good:
            level["median"] = float(np.median(good))
            level["q25"] = float(np.percentile(good, 25))
            level["q75"] = float(np.percentile(good, 75))
            medians.append((N, level["median"]))
        else:
            level["median"] = None
        attempts = [r["extra"].get("init_attempts") for r in cell if r["extra"].get("init_attempts")]
        if attempts:
            level["init_attempts_mean"] = float(np.mean(attempts))
        per_level.append(level)

    slope_kind = kind in ("ksd_rate_ct", "iid_baseline", "moment_bound")
    quota_exceeded = (
        len(medians) < 3 if slope_kind else len(medians) < len(n_grid)
    )
    fit = None
    if len(medians) >= 3 and all(m > 0 for _, m in medians):
        fit = fit_loglog(medians)
    desc, passed = _criterion(cfg, kind, fit, medians)
    if quota_exceeded:
        passed = False

    summary = {
        "experiment": kind,
        "name": name,
        "config_hash": chash,
        "content_version": cversion,
        "master_seed": int(master_seed),
        "n_grid": [int(n) for n in n_grid],
        "replicates": int(replicates),
        "metric_name": metric_name,
        "per_N": per_level,
        "fit": None
        if fit is None
        else {
            "slope": fit.slope,
            "intercept": fit.intercept,
            "r_squared": fit.r_squared,
            "n_points": fit.n_points,
        },
        "criterion": desc,
        "pass": bool(passed),
        "quota_exceeded": bool(quota_exceeded),
        "timing": {"total_s": elapsed, "workers": workers},
    }
    tmp = summary_path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, summary_path)
    return ExperimentResult(
        summary=summary, metrics_path=metrics_path, summary_path=summary_path, resumed=False
    )
