"""Command-line front end.

Subcommands:

* ``svgd-lab run CONFIG`` -- run one experiment config (resumable).
* ``svgd-lab sweep CONFIG [CONFIG ...]`` -- run several configs in sequence.
* ``svgd-lab ksd --samples CSV --config CONFIG`` -- discrepancy diagnostics
  for a stored sample against the config's kernel/target; prints JSON.
* ``svgd-lab w2 --a CSV --b CSV [--s {1,2}]`` -- exact W_s between two
  equal-size samples; prints JSON.
* ``svgd-lab rate-exponent --d D --nu NU`` -- closed-form contraction
  exponent r(d); prints JSON.

Sample CSV layout: header ``x0,...,x{d-1}``, one point per row, full
round-trip float precision.  Exit codes: 0 success/criterion pass, 2
criterion failed, 3 bad configuration or input, 4 simulation failure quota
exceeded.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings

import numpy as np

from .config import ConfigError, read_config_file
from .harness import run_experiment
from .kernels import kernel_from_config
from .potentials import potential_from_config
from .stein import c_star_sup, ksd_squared, w2_rate_exponent
from .transport import wasserstein_assign

__all__ = ["main", "read_samples_csv", "write_samples_csv"]


def write_samples_csv(path, X):
    """Write an (n, d) sample with header x0,...,x{d-1} at full precision."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    header = ",".join(f"x{i}" for i in range(X.shape[1]))
    np.savetxt(path, X, delimiter=",", header=header, comments="", fmt="%.17g")


def read_samples_csv(path):
    """Read a sample CSV produced by ``write_samples_csv`` (or hand-built)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        cols = [c.strip() for c in header.split(",")]
        expected = [f"x{i}" for i in range(len(cols))]
        if cols != expected:
            raise ConfigError(
                f"{path}: expected header {','.join(expected)!r}, got {header!r}"
            )
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # empty files are reported below instead
            X = np.loadtxt(fh, delimiter=",", ndmin=2)
    if X.size == 0:
        raise ConfigError(f"{path}: no sample rows")
    if X.shape[1] != len(cols):
        raise ConfigError(f"{path}: rows have {X.shape[1]} columns, header has {len(cols)}")
    return X


def _cmd_run(args):
    result = run_experiment(args.config, workers=args.workers, force=args.force)
    fit = result.summary.get("fit")
    line = {
        "name": result.summary["name"],
        "pass": result.summary["pass"],
        "criterion": result.summary["criterion"],
        "fit": fit,
        "resumed": result.resumed,
        "metrics": result.metrics_path,
        "summary": result.summary_path,
    }
    print(json.dumps(line, indent=2, sort_keys=True))
    return result.exit_code


def _cmd_sweep(args):
    worst = 0
    for cfg_path in args.configs:
        ns = argparse.Namespace(config=cfg_path, workers=args.workers, force=args.force)
        worst = max(worst, _cmd_run(ns))
    return worst


def _cmd_ksd(args):
    cfg = read_config_file(args.config)
    X = read_samples_csv(args.samples)
    potential = potential_from_config(cfg)
    if potential.dim != X.shape[1]:
        raise ConfigError(
            f"sample dimension {X.shape[1]} does not match potential.d = {potential.dim}"
        )
    kernel = kernel_from_config(cfg, potential.dim)
    report = ksd_squared(kernel, potential, X)
    sup = c_star_sup(kernel, potential)
    out = {
        "ksd2": report.ksd2,
        "estimator": report.estimator,
        "n": report.n,
        "d": potential.dim,
        "kernel": report.kernel,
        "potential": report.potential,
        "c_star_sup": None if math.isinf(sup) else sup,
        "c_star_classification": "unbounded (quadratic growth)" if math.isinf(sup) else "bounded",
    }
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def _cmd_w2(args):
    A = read_samples_csv(args.a)
    B = read_samples_csv(args.b)
    if A.shape != B.shape:
        raise ConfigError(f"samples must have identical shapes, got {A.shape} and {B.shape}")
    result = wasserstein_assign(A, B, order=args.s)
    out = {"distance": result.distance, "order": result.order, "n": int(A.shape[0]), "d": int(A.shape[1])}
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def _cmd_rate_exponent(args):
    r = w2_rate_exponent(args.d, args.nu)
    print(json.dumps({"d": args.d, "nu": args.nu, "r": r}, indent=2, sort_keys=True))
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="svgd-lab",
        description="Finite-particle kernel transport experiments and diagnostics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("config", help="path to a flat key = value config file")
    p_run.add_argument("--workers", type=int, default=None, help="replicate worker processes")
    p_run.add_argument("--force", action="store_true", help="recompute even if outputs exist")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run several experiment configs in sequence")
    p_sweep.add_argument("configs", nargs="+", help="config files to run")
    p_sweep.add_argument("--workers", type=int, default=None)
    p_sweep.add_argument("--force", action="store_true")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_ksd = sub.add_parser("ksd", help="discrepancy diagnostics for a stored sample")
    p_ksd.add_argument("--samples", required=True, help="sample CSV (header x0,...,x{d-1})")
    p_ksd.add_argument("--config", required=True, help="config with kernel.* and potential.*")
    p_ksd.set_defaults(func=_cmd_ksd)

    p_w2 = sub.add_parser("w2", help="exact Wasserstein distance between two samples")
    p_w2.add_argument("--a", required=True, help="first sample CSV")
    p_w2.add_argument("--b", required=True, help="second sample CSV")
    p_w2.add_argument("--s", type=int, choices=(1, 2), default=2, help="distance order")
    p_w2.set_defaults(func=_cmd_w2)

    p_rate = sub.add_parser("rate-exponent", help="closed-form contraction exponent r(d)")
    p_rate.add_argument("--d", type=int, required=True, help="ambient dimension")
    p_rate.add_argument("--nu", type=float, required=True, help="kernel smoothness")
    p_rate.set_defaults(func=_cmd_rate_exponent)
    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"svgd-lab: config error: {exc}", file=sys.stderr)
        return 3
    except (OSError, ValueError) as exc:
        print(f"svgd-lab: error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
