from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from xcov import bench
from xcov.model import Bimodal, ModelSpec, Null, make_rng


def test_mean_ci_fields():
    ci = bench.mean_ci([1.0, 2.0, 3.0, float("nan")])
    assert ci["count"] == 3 and ci["mean"] == 2.0
    assert ci["half_width"] == pytest.approx(1.96 * 1.0 / np.sqrt(3))
    assert bench.mean_ci([])["mean"] is None


def test_mean_ci_coverage():
    rng = make_rng(0)
    hits = 0
    for _ in range(500):
        ci = bench.mean_ci(rng.normal(3.0, 2.0, size=100))
        hits += abs(ci["mean"] - 3.0) <= ci["half_width"]
    assert 0.90 <= hits / 500 <= 0.99


def test_empty_report_has_headers(tmp_path):
    result = bench.Table1Result(bench.Table1Config(trials=0))
    paths = bench.emit_report(result, tmp_path, "t")
    rows = list(csv.reader(open(tmp_path / "t_trials.csv")))
    assert rows == [list(bench.TrialReport.__dataclass_fields__)]
    assert json.loads((tmp_path / "t.json").read_text())["models"]["1"]["algo_over_empirical"]["count"] == 0
    assert len(paths) == 2


def test_report_io_error_names_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match="file"):
        bench.emit_report(bench.Table1Result(bench.Table1Config(trials=0)), blocker / "sub", "t")


def test_table1_schema_and_determinism(tmp_path):
    config = bench.Table1Config(n=20, p=35, T=50, trials=3, seed=7)
    bench.emit_report(bench.run_table1(config), tmp_path / "a", "t")
    bench.emit_report(bench.run_table1(config), tmp_path / "b", "t")
    a = (tmp_path / "a" / "t.json").read_bytes()
    assert a == (tmp_path / "b" / "t.json").read_bytes()
    models = json.loads(a)["models"]
    assert sorted(models) == ["1", "2", "3", "4", "5", "6"]
    for m in models.values():
        for key in ("algo_over_empirical", "algo_over_lp"):
            assert {"mean", "half_width"} <= set(m[key])


def test_parallel_trials_match_serial():
    base = bench.Table1Config(n=10, p=15, T=30, trials=4, models=("3",))
    serial = bench.run_table1(base)
    parallel = bench.run_table1(bench.Table1Config(**{**base.__dict__, "workers": 3}))
    assert serial.trials == parallel.trials


def test_table1_trial_invariants():
    result = bench.run_table1(bench.Table1Config(n=20, p=35, T=50, trials=2))
    for t in result.trials:
        assert min(t.dist_empirical, t.dist_algo1, t.dist_algo2, t.dist_lp) >= 0
        assert t.quotient_emp == pytest.approx(100 * t.dist_algo1 / t.dist_empirical)


def test_oracle_validation_null_truth_uses_absolute_fallback():
    zero = Bimodal(low=(0.0, 0.0), high=(0.0, 0.0))
    config = bench.OracleValidationConfig(T_grid=(100,), trials=3, density=zero)
    result = bench.run_oracle_validation(config)
    for row in result.rows:
        assert row["l_true_re"] == 0 and row["l_true_im"] == 0
        assert np.isfinite(row["rel_thm1"]) and row["rel_thm1"] < 0.05
        assert np.isfinite(row["rel_thm2"]) and row["rel_thm2"] < 0.05


def test_prop3_null_specialisation():
    spec = ModelSpec(Null(), n=10, p=15, T=20)
    result = bench.run_prop3_checks(spec, trials=500)
    rows = result.rows
    assert all(r["target_empirical_norm"] == pytest.approx(10 * 15 / 20) for r in rows)
    assert result.identity("empirical_norm")["pass"]


def test_overfit_in_sample_identity():
    result = bench.run_overfitting(bench.OverfitConfig(n=30, p=40, T=200, T_oos=50))
    assert result.in_sample_identity_error() < 1e-10
    assert len(result.tables()["scatter"][1]) == 30


def test_overfit_profiles():
    assert bench.OverfitConfig.profile("paper").n == 1000
    assert bench.OverfitConfig.profile("desk", seed=3).seed == 3


def test_simulation_histogram_counts():
    spec = ModelSpec(Null(), n=30, p=40, T=200)
    result = bench.run_simulation(spec)
    header, rows = result.tables()["histogram"]
    assert header == ["bin_lo", "bin_hi", "true", "empirical", "cleaned"]
    assert sum(r[2] for r in rows) == 30
    assert sum(r[3] for r in rows) == 30
