import json
import math

import numpy as np
import pytest
import yaml
from click.testing import CliRunner

from phasesing.chaos import LimitLaw, sample_limit, variance_constant
from phasesing.cli import main
from phasesing.harness import (
    ExperimentConfig,
    ExperimentReport,
    SchemaVersionError,
    distribution_distance,
    load,
    persist,
    records_from_csv,
    report_to_csv,
    run_experiment,
    splitmix64,
    stream,
    stream_seed,
)
from phasesing.lattice import require_level


def strip_timing(report):
    d = report.to_dict()
    d["metadata"].pop("wall_time")
    d["metadata"]["config"].pop("workers")
    return json.dumps(d, sort_keys=True)


@pytest.fixture(scope="module")
def small_report():
    cfg = ExperimentConfig(n=(5, 13), replications=30, master_seed=42,
                           checks={"mean", "variance", "chaos-identities"})
    return run_experiment(cfg)


# -- seeding ---------------------------------------------------------------------


def test_splitmix64_reference_values():
    # first outputs of the reference generator seeded with 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert splitmix64(0x9E3779B97F4A7C15) == 0x6E789E6AA1B965F4


def test_stream_seed_distinct_and_stable():
    seeds = {stream_seed(7, n, r, t) for n in (5, 25) for r in range(50) for t in ("wave", "limit", "kacrice")}
    assert len(seeds) == 300
    assert stream_seed(7, 25, 3, "wave") == stream_seed(7, 25, 3, "wave")
    a = stream(1, 25, 0, "wave").standard_normal(5)
    b = stream(1, 25, 0, "wave").standard_normal(5)
    assert np.array_equal(a, b)
    with pytest.raises(KeyError):
        stream_seed(1, 25, 0, "other")


# -- configuration -----------------------------------------------------------------


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(n=(3,), replications=10)
    with pytest.raises(ValueError):
        ExperimentConfig(n=(25,), replications=0)
    with pytest.raises(ValueError):
        ExperimentConfig(n=(25,), replications=10, checks={"bogus"})
    with pytest.raises(ValueError):
        ExperimentConfig(n=(25,), replications=50, checks={"distribution"})
    cfg = ExperimentConfig(n=25, replications=10)
    assert cfg.n == (25,)
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


# -- running ---------------------------------------------------------------------


def test_determinism_across_workers():
    cfg = dict(n=(13,), replications=40, master_seed=9, checks={"mean", "variance"})
    a = run_experiment(ExperimentConfig(workers=1, **cfg))
    b = run_experiment(ExperimentConfig(workers=8, **cfg))
    assert strip_timing(a) == strip_timing(b)


def test_small_report_contents(small_report):
    for rec in small_report.records:
        lv = require_level(rec.n)
        assert rec.N == lv.multiplicity
        assert rec.predicted_mean == pytest.approx(math.pi * rec.n)
        E = lv.eigenvalue
        assert rec.predicted_var == pytest.approx(variance_constant(rec.mu4) * E**2 / rec.N**2)
        assert rec.extras["charge_violations"] == 0
        assert rec.checks["chaos-identities"]
        assert rec.extras["projection2_max_abs"] < 1e-8
        assert set(rec.checks) == {"mean", "variance", "chaos-identities"}


def test_sanity_chain_residual_variance(small_report):
    for rec in small_report.records:
        assert rec.extras["var_residual"] < rec.var_I


def test_mean_n25():
    rep = run_experiment(ExperimentConfig(n=(25,), replications=500, master_seed=42, checks={"mean"}))
    rec = rep.records[0]
    assert abs(rec.mean_I - 25 * math.pi) <= 4 * rec.stderr_mean
    assert rec.checks["mean"]


def test_variance_ratio_n25():
    # band [0.5, 2] * d_25 around the asymptotic variance
    rep = run_experiment(ExperimentConfig(n=(25,), replications=500, master_seed=42, checks={"variance"}))
    rec = rep.records[0]
    d25 = (3 * 0.2288**2 + 5) / (128 * math.pi**2)
    E = require_level(25).eigenvalue
    assert rec.predicted_var == pytest.approx(d25 * E**2 / 144)
    assert rec.extras["variance_ratio"] == pytest.approx(rec.var_I / rec.predicted_var)
    assert 0.5 <= rec.extras["variance_ratio"] <= 2.0


# -- distribution distance -----------------------------------------------------------


def test_ks_self():
    rng = np.random.default_rng(0)
    law = LimitLaw(0.3)
    x = sample_limit(law, rng, 100_000)
    assert distribution_distance(x, law, 100_000, rng) < 0.01


def test_ks_distinguishes_laws():
    rng = np.random.default_rng(1)
    x = sample_limit(LimitLaw(0.0), rng, 100_000)
    assert distribution_distance(x, LimitLaw(1.0), 100_000, rng) > 0.02


def test_ks_needs_samples():
    with pytest.raises(ValueError):
        distribution_distance(np.zeros(50), LimitLaw(0.0))


# -- persistence -----------------------------------------------------------------------


def test_json_round_trip(small_report, tmp_path):
    path = tmp_path / "r.json"
    csv_path = persist(small_report, path)
    back = load(path)
    assert back == small_report
    assert csv_path.exists()


def test_csv_round_trip(small_report):
    text = report_to_csv(small_report)
    assert records_from_csv(text) == small_report.records


def test_schema_version_error(small_report, tmp_path):
    d = small_report.to_dict()
    d["schema_version"] = 99
    path = tmp_path / "future.json"
    path.write_text(json.dumps(d))
    with pytest.raises(SchemaVersionError):
        load(path)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load(tmp_path / "nope.json")


def test_report_passed_flag(small_report):
    rep = ExperimentReport(small_report.records, {})
    assert rep.passed == all(all(r.checks.values()) for r in small_report.records)


# -- CLI -------------------------------------------------------------------------------


def test_cli_simulate_and_report(tmp_path):
    out = tmp_path / "rep.json"
    r = CliRunner().invoke(main, ["simulate", "--n", "13", "--reps", "30", "--seed", "3",
                                  "--checks", "mean,chaos-identities", "--out", str(out)])
    assert r.exit_code == 0, r.output
    assert "n=13 mean: PASS" in r.output
    assert out.exists() and out.with_suffix(".csv").exists()
    r2 = CliRunner().invoke(main, ["report", "--in", str(out), "--format", "csv"])
    assert r2.exit_code == 0
    assert r2.output.startswith("n,N,mu4")
    r3 = CliRunner().invoke(main, ["report", "--in", str(out), "--format", "json"])
    assert json.loads(r3.output)["schema_version"] == 1


def test_cli_config_file(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump({"n": [5], "reps": 20, "seed": 1, "checks": ["mean"]}))
    zeros = tmp_path / "z.csv"
    grid = tmp_path / "g.csv"
    r = CliRunner().invoke(main, ["simulate", "--config", str(cfg), "--zeros-csv", str(zeros),
                                  "--dump-grid", str(grid), "--grid-size", "8"])
    assert r.exit_code == 0, r.output
    assert zeros.read_text().splitlines()[0] == "x1,x2,charge,detjac"
    assert len(grid.read_text().splitlines()) == 65
    bad = tmp_path / "bad.yaml"
    bad.write_text("foo: 1\n")
    r = CliRunner().invoke(main, ["simulate", "--config", str(bad)])
    assert r.exit_code != 0


def test_cli_usage_errors():
    r = CliRunner().invoke(main, ["simulate", "--reps", "5"])
    assert r.exit_code == 2
    r = CliRunner().invoke(main, ["simulate", "--n", "3", "--reps", "5"])
    assert r.exit_code == 2


def test_cli_lattice():
    r = CliRunner().invoke(main, ["lattice", "--range", "1:30"])
    assert r.exit_code == 0
    lines = r.output.splitlines()
    assert lines[0] == "n,N,mu4,r4"
    row25 = next(l for l in lines if l.startswith("25,"))
    n, N, mu4, r4 = row25.split(",")
    assert N == "12" and float(mu4) == pytest.approx(-0.2288)
    assert float(r4) == pytest.approx(3 * 11 / 12**3)


def test_cli_chaos_check():
    r = CliRunner().invoke(main, ["chaos-check", "--n", "25", "--reps", "5"])
    assert r.exit_code == 0, r.output
    lines = r.output.splitlines()
    assert lines[0] == "check,n,samples,max_abs_err,pass"
    assert all(l.endswith("true") for l in lines[1:])


def test_cli_kacrice():
    r = CliRunner().invoke(main, ["kacrice", "--n", "25", "--draws", "10000"])
    assert r.exit_code == 0, r.output
    lines = r.output.splitlines()
    assert lines[0] == "x_norm,direction,det_omega,psi,k2,k2_stderr"
    assert len(lines) == 1 + 15
