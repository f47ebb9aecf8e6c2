import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from svgd_lab.cli import main, read_samples_csv, write_samples_csv
from svgd_lab.config import (
    ConfigError,
    config_hash,
    content_version,
    get_typed,
    parse_flat_config,
)
from svgd_lab.harness import derive_seed, fit_loglog, median_bandwidth, run_experiment

METRIC_FIELDS = [
    "experiment",
    "N",
    "replicate",
    "seed",
    "metric_name",
    "value",
    "wall_time_s",
    "blowup",
]


def tiny_iid_cfg(name, out_dir):
    return {
        "experiment.kind": "iid_baseline",
        "experiment.name": name,
        "experiment.n_grid": "4,6,8",
        "experiment.replicates": "2",
        "seed": "123",
        "kernel.kind": "gaussian",
        "kernel.h": "1.0",
        "potential.kind": "isotropic_gaussian",
        "potential.d": "2",
        "potential.c0": "1.0",
        "output.dir": str(out_dir),
    }


# ---------------------------------------------------------------------------
# rate fitting
# ---------------------------------------------------------------------------


def test_fit_loglog_exact_recovery():
    pts = [(n, 3.7 * n ** -1.5) for n in (4, 16, 64, 256)]
    fit = fit_loglog(pts)
    assert_allclose(fit.slope, -1.5, rtol=1e-12)
    assert_allclose(fit.intercept, math.log(3.7), rtol=1e-12)
    assert_allclose(fit.r_squared, 1.0, atol=1e-12)
    assert fit.n_points == 4


def test_fit_loglog_constant_series():
    fit = fit_loglog([(2, 5.0), (4, 5.0), (8, 5.0)])
    assert fit.slope == 0.0
    assert fit.r_squared == 1.0


def test_fit_loglog_validation():
    with pytest.raises(ValueError, match="at least 3 points"):
        fit_loglog([(2, 1.0), (4, 0.5)])
    with pytest.raises(ValueError, match=">= 1"):
        fit_loglog([(0, 1.0), (2, 1.0), (4, 1.0)])
    with pytest.raises(ValueError, match="positive and finite"):
        fit_loglog([(2, 1.0), (4, -0.5), (8, 1.0)])
    with pytest.raises(ValueError, match="positive and finite"):
        fit_loglog([(2, 1.0), (4, math.nan), (8, 1.0)])
    with pytest.raises(ValueError, match="identical"):
        fit_loglog([(4, 1.0), (4, 2.0), (4, 3.0)])


# ---------------------------------------------------------------------------
# seeding and bandwidth helpers
# ---------------------------------------------------------------------------


def test_derive_seed_frozen():
    assert derive_seed(20260819, 16, 0) == 3068357341862501688
    assert derive_seed(20260819, 16, 1) == 3429806762253628320
    assert derive_seed(1, 4, 0) == 4375468624221243144


def test_derive_seed_distinct_cells():
    seeds = {derive_seed(7, N, r) for N in (2, 4, 8, 16) for r in range(10)}
    assert len(seeds) == 40


def test_median_bandwidth():
    assert median_bandwidth(np.array([[0.0], [1.0], [3.0]])) == 2.0
    with pytest.raises(ValueError, match="at least 2"):
        median_bandwidth(np.array([[1.0]]))


# ---------------------------------------------------------------------------
# flat config parsing
# ---------------------------------------------------------------------------


def test_parse_flat_config():
    text = "a.b = 1  # comment\n\n# full-line comment\nc = two words\n"
    assert parse_flat_config(text) == {"a.b": "1", "c": "two words"}


def test_parse_errors_carry_line_numbers():
    with pytest.raises(ConfigError, match="line 2: duplicate key 'a'"):
        parse_flat_config("a = 1\na = 2\n")
    with pytest.raises(ConfigError, match="line 1: expected"):
        parse_flat_config("just words\n")
    with pytest.raises(ConfigError, match="line 1: empty key"):
        parse_flat_config("= 3\n")


def test_config_hash_order_invariant():
    h1 = config_hash({"a": "1", "b": "2"})
    h2 = config_hash({"b": "2", "a": "1"})
    assert h1 == h2
    assert h1 != config_hash({"a": "1", "b": "3"})


def test_content_version_matches_git_blob():
    assert content_version("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a"
    assert content_version(b"hello\n") == content_version("hello\n")


def test_get_typed():
    cfg = {"n": "8", "x": "2.5", "s": "abc", "grid": "2, 4,8"}
    assert get_typed(cfg, "n", "int") == 8
    assert get_typed(cfg, "x", "float") == 2.5
    assert get_typed(cfg, "s", "str") == "abc"
    assert get_typed(cfg, "grid", "int_list") == [2, 4, 8]
    assert get_typed(cfg, "missing", "int", default=3) == 3
    assert get_typed(cfg, "missing", "int") is None
    with pytest.raises(ConfigError, match="missing required"):
        get_typed(cfg, "missing", "int", required=True)
    with pytest.raises(ConfigError, match="cannot parse"):
        get_typed(cfg, "s", "int")
    with pytest.raises(ConfigError, match="unknown coercion"):
        get_typed(cfg, "n", "bool")


# ---------------------------------------------------------------------------
# experiment validation
# ---------------------------------------------------------------------------


def test_run_rejects_bad_configs(tmp_path):
    base = tiny_iid_cfg("v", tmp_path)

    bad = dict(base, **{"experiment.typo": "1"})
    with pytest.raises(ConfigError, match="unknown config keys"):
        run_experiment(bad, out_dir=str(tmp_path))

    bad = dict(base, **{"experiment.kind": "mystery"})
    with pytest.raises(ConfigError, match="experiment.kind"):
        run_experiment(bad, out_dir=str(tmp_path))

    bad = dict(base, **{"experiment.n_grid": "8,4"})
    with pytest.raises(ConfigError, match="strictly increasing"):
        run_experiment(bad, out_dir=str(tmp_path))

    bad = dict(base, **{"experiment.kind": "ksd_rate_ct", "dynamics.mode": "discrete"})
    with pytest.raises(ConfigError, match="continuous"):
        run_experiment(bad, out_dir=str(tmp_path))

    bad = dict(base, **{"init.kind": "uniform"})
    with pytest.raises(ConfigError, match="init.kind"):
        run_experiment(bad, out_dir=str(tmp_path))

    bad = dict(base, **{"dynamics.method": "verlet"})
    with pytest.raises(ConfigError, match="dynamics.method"):
        run_experiment(bad, out_dir=str(tmp_path))

    bad = dict(base, **{"kernel.kind": "matern", "kernel.h": "median"})
    with pytest.raises(ConfigError, match="median"):
        run_experiment(bad, out_dir=str(tmp_path))

    bad = dict(base, **{"experiment.replicates": "0"})
    with pytest.raises(ConfigError, match="replicates"):
        run_experiment(bad, out_dir=str(tmp_path))


# ---------------------------------------------------------------------------
# end-to-end runs
# ---------------------------------------------------------------------------


def test_iid_run_artifacts(tmp_path):
    cfg = tiny_iid_cfg("tiny", tmp_path)
    res = run_experiment(cfg, out_dir=str(tmp_path))
    assert not res.resumed
    assert res.exit_code in (0, 2)

    with open(res.metrics_path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    assert len(lines) == 3 * 2  # |n_grid| * replicates
    for line in lines:
        row = json.loads(line)
        assert list(row) == METRIC_FIELDS
        assert row["experiment"] == "iid_baseline"
        assert row["metric_name"] == "ksd2"
        assert row["wall_time_s"] == 0.0
        assert row["blowup"] is False
        assert row["seed"] == derive_seed(123, row["N"], row["replicate"])
        assert row["value"] > 0
        # literal key order on disk, not just parsed content
        assert line.startswith('{"experiment": ')

    with open(res.summary_path, "r", encoding="utf-8") as fh:
        summary = json.load(fh)
    assert summary == res.summary
    assert summary["n_grid"] == [4, 6, 8]
    assert summary["replicates"] == 2
    assert summary["master_seed"] == 123
    assert summary["metric_name"] == "ksd2"
    assert summary["quota_exceeded"] is False
    assert summary["fit"] is not None and summary["fit"]["n_points"] == 3
    assert len(summary["per_N"]) == 3
    for level in summary["per_N"]:
        assert len(level["values"]) == 2
        assert level["q25"] <= level["median"] <= level["q75"]
    assert summary["config_hash"] == config_hash(cfg)


def test_run_is_resumable_and_forceable(tmp_path):
    cfg = tiny_iid_cfg("resume", tmp_path)
    first = run_experiment(cfg, out_dir=str(tmp_path))
    with open(first.metrics_path, "rb") as fh:
        metrics_bytes = fh.read()

    second = run_experiment(cfg, out_dir=str(tmp_path))
    assert second.resumed
    assert second.summary == first.summary
    with open(second.metrics_path, "rb") as fh:
        assert fh.read() == metrics_bytes

    forced = run_experiment(cfg, out_dir=str(tmp_path), force=True)
    assert not forced.resumed
    with open(forced.metrics_path, "rb") as fh:
        assert fh.read() == metrics_bytes  # deterministic recompute

    # changing the config invalidates the cache
    other = dict(cfg, seed="124")
    rerun = run_experiment(other, out_dir=str(tmp_path))
    assert not rerun.resumed


def test_worker_count_never_changes_bytes(tmp_path):
    cfg1 = tiny_iid_cfg("w1", tmp_path / "a")
    cfg2 = tiny_iid_cfg("w1", tmp_path / "b")
    r1 = run_experiment(cfg1, workers=1, out_dir=str(tmp_path / "a"))
    r2 = run_experiment(cfg2, workers=2, out_dir=str(tmp_path / "b"))
    with open(r1.metrics_path, "rb") as f1, open(r2.metrics_path, "rb") as f2:
        assert f1.read() == f2.read()
    assert r1.summary["per_N"] == r2.summary["per_N"]


def test_blowup_quota(tmp_path):
    cfg = {
        "experiment.kind": "ksd_rate_dt",
        "experiment.name": "boom",
        "experiment.n_grid": "2,3,4",
        "experiment.replicates": "2",
        "seed": "5",
        "kernel.kind": "gaussian",
        "kernel.h": "1.0",
        "potential.kind": "isotropic_gaussian",
        "potential.d": "1",
        "potential.c0": "1.0",
        "dynamics.alpha": "0.5",
        "dynamics.eta": "1000.0",  # way past stability; every replicate diverges
        "init.scale": "1.0",
    }
    res = run_experiment(cfg, out_dir=str(tmp_path))
    assert res.exit_code == 4
    assert res.summary["quota_exceeded"] is True
    assert res.summary["pass"] is False
    with open(res.metrics_path, "r", encoding="utf-8") as fh:
        rows = [json.loads(line) for line in fh.read().splitlines()]
    assert len(rows) == 6
    assert all(row["blowup"] is True and row["value"] is None for row in rows)
    assert all(level["median"] is None for level in res.summary["per_N"])


def test_discrete_run_records_schedule(tmp_path):
    cfg = {
        "experiment.kind": "ksd_rate_dt",
        "experiment.name": "dt",
        "experiment.n_grid": "2,3,4",
        "experiment.replicates": "1",
        "seed": "9",
        "potential.kind": "isotropic_gaussian",
        "potential.d": "2",
        "potential.c0": "1.0",
        "dynamics.alpha": "0.5",
        "init.scale": "1.0",
    }
    res = run_experiment(cfg, out_dir=str(tmp_path))
    assert res.exit_code in (0, 2)
    for level in res.summary["per_N"]:
        assert level["blowups"] == 0
        assert level["init_attempts_mean"] >= 1.0


# ---------------------------------------------------------------------------
# sample CSV round trip
# ---------------------------------------------------------------------------


def test_samples_csv_roundtrip_bitwise(tmp_path, rng):
    X = rng.standard_normal((23, 3)) * np.pi
    path = tmp_path / "s.csv"
    write_samples_csv(path, X)
    back = read_samples_csv(path)
    assert np.array_equal(back, X)  # %.17g round-trips float64 exactly
    with open(path, "r", encoding="utf-8") as fh:
        assert fh.readline().strip() == "x0,x1,x2"


def test_samples_csv_validation(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(ConfigError, match="header"):
        read_samples_csv(bad)
    empty = tmp_path / "empty.csv"
    empty.write_text("x0,x1\n")
    with pytest.raises(ConfigError, match="no sample rows"):
        read_samples_csv(empty)


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------


def write_cfg(path, cfg):
    path.write_text("".join(f"{k} = {v}\n" for k, v in cfg.items()))
    return str(path)


def test_cli_run_pass_and_fail(tmp_path, capsys):
    cfg = tiny_iid_cfg("cli_pass", tmp_path / "out")
    cfg["criterion.slope_min"] = "-5.0"
    cfg["criterion.slope_max"] = "5.0"
    path = write_cfg(tmp_path / "pass.cfg", cfg)
    assert main(["run", path]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["pass"] is True
    assert out["resumed"] is False

    # resumed on the second invocation
    assert main(["run", path]) == 0
    assert json.loads(capsys.readouterr().out)["resumed"] is True

    cfg_fail = tiny_iid_cfg("cli_fail", tmp_path / "out")
    cfg_fail["criterion.slope_min"] = "5.0"
    cfg_fail["criterion.slope_max"] = "6.0"
    path_fail = write_cfg(tmp_path / "fail.cfg", cfg_fail)
    assert main(["run", path_fail]) == 2
    capsys.readouterr()


def test_cli_sweep_reports_worst(tmp_path, capsys):
    ok = tiny_iid_cfg("sw_ok", tmp_path / "out")
    ok["criterion.slope_min"] = "-5.0"
    ok["criterion.slope_max"] = "5.0"
    bad = tiny_iid_cfg("sw_bad", tmp_path / "out")
    bad["criterion.slope_min"] = "5.0"
    bad["criterion.slope_max"] = "6.0"
    p_ok = write_cfg(tmp_path / "ok.cfg", ok)
    p_bad = write_cfg(tmp_path / "bad.cfg", bad)
    assert main(["sweep", p_ok, p_bad]) == 2
    capsys.readouterr()


def test_cli_run_config_error(tmp_path, capsys):
    path = tmp_path / "broken.cfg"
    path.write_text("experiment.kind = iid_baseline\nmystery.key = 1\n")
    assert main(["run", str(path)]) == 3
    assert "config error" in capsys.readouterr().err


def test_cli_ksd_bounded(tmp_path, capsys, rng):
    samples = tmp_path / "x.csv"
    write_samples_csv(samples, rng.standard_normal((10, 2)))
    cfg = write_cfg(
        tmp_path / "k.cfg",
        {
            "kernel.kind": "gaussian",
            "kernel.h": "1.0",
            "potential.kind": "isotropic_gaussian",
            "potential.d": "2",
            "potential.c0": "1.0",
        },
    )
    assert main(["ksd", "--samples", str(samples), "--config", cfg]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["estimator"] == "v_statistic"
    assert out["n"] == 10 and out["d"] == 2
    assert out["ksd2"] >= 0.0
    assert out["c_star_sup"] == 4.0
    assert out["c_star_classification"] == "bounded"


def test_cli_ksd_unbounded_kernel(tmp_path, capsys, rng):
    samples = tmp_path / "x.csv"
    write_samples_csv(samples, rng.standard_normal((6, 2)))
    cfg = write_cfg(
        tmp_path / "k.cfg",
        {
            "kernel.kind": "bilinear_plus_matern",
            "kernel.nu": "2.5",
            "potential.kind": "isotropic_gaussian",
            "potential.d": "2",
        },
    )
    assert main(["ksd", "--samples", str(samples), "--config", cfg]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["c_star_sup"] is None
    assert out["c_star_classification"] == "unbounded (quadratic growth)"


def test_cli_ksd_dimension_mismatch(tmp_path, capsys, rng):
    samples = tmp_path / "x.csv"
    write_samples_csv(samples, rng.standard_normal((6, 3)))
    cfg = write_cfg(
        tmp_path / "k.cfg",
        {"potential.kind": "isotropic_gaussian", "potential.d": "2"},
    )
    assert main(["ksd", "--samples", str(samples), "--config", cfg]) == 3
    capsys.readouterr()


def test_cli_w2(tmp_path, capsys, rng):
    from svgd_lab.transport import wasserstein_assign

    A = rng.standard_normal((8, 2))
    B = rng.standard_normal((8, 2))
    pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
    write_samples_csv(pa, A)
    write_samples_csv(pb, B)
    assert main(["w2", "--a", str(pa), "--b", str(pb), "--s", "1"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert_allclose(out["distance"], wasserstein_assign(A, B, order=1).distance, rtol=1e-15)
    assert out["order"] == 1 and out["n"] == 8 and out["d"] == 2

    write_samples_csv(pb, rng.standard_normal((9, 2)))
    assert main(["w2", "--a", str(pa), "--b", str(pb)]) == 3
    capsys.readouterr()


def test_cli_rate_exponent(capsys):
    assert main(["rate-exponent", "--d", "2", "--nu", "2.5"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert_allclose(out["r"], 1.0 / 185.625, rtol=1e-12)

    assert main(["rate-exponent", "--d", "0", "--nu", "2.5"]) == 3
    capsys.readouterr()
