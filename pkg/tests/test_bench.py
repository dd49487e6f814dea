import csv
import io

import numpy as np
import pytest

from pinchopt import bench
from pinchopt.bench import ConfigError, ExperimentSpec
from pinchopt.fp_solver import PgaSettings
from pinchopt.model import SystemConfig

FAST = PgaSettings(tau_max=5, t_max=2)


def small_spec(**kw):
    base = dict(ks=[8], ns=[3], dmins=[0.1], trials=3, seed=11, settings=FAST)
    base.update(kw)
    return ExperimentSpec(**base)


def without_timing(text):
    rows = list(csv.reader(io.StringIO(text)))
    return [r[:-1] for r in rows]


def test_generate_scenario_is_deterministic_and_in_region():
    cfg = SystemConfig()
    a = bench.generate_scenario(cfg, 20, 123)
    b = bench.generate_scenario(cfg, 20, 123)
    np.testing.assert_array_equal(a.users, b.users)
    assert not np.array_equal(a.users, bench.generate_scenario(cfg, 20, 124).users)
    one = bench.generate_scenario(cfg, 1, 5)
    assert one.users.shape == (1, 2)
    one.validate(cfg)
    with pytest.raises(ValueError):
        bench.generate_scenario(cfg, 0, 5)


def test_larger_drop_extends_smaller():
    cfg = SystemConfig()
    np.testing.assert_array_equal(bench.generate_scenario(cfg, 60, 9).users[:50],
                                  bench.generate_scenario(cfg, 50, 9).users)


def test_scenario_uniform_statistics():
    cfg = SystemConfig()
    users = bench.generate_scenario(cfg, 10_000, 2024).users
    sigma = 10.0 / np.sqrt(12 * 10_000)
    assert abs(users[:, 0].mean() - 5.0) < 3 * sigma
    assert abs(users[:, 1].mean() - 5.0) < 3 * sigma


def test_trial_seeds_differ():
    seeds = {bench.trial_seed(0, i) for i in range(100)}
    assert len(seeds) == 100
    assert bench.trial_seed(3, 4) == bench.trial_seed(3, 4)


def test_resolve_dmin():
    cfg = SystemConfig()
    assert bench.resolve_dmin("lambda/2", cfg) == cfg.wavelength / 2
    assert bench.resolve_dmin("0.2", cfg) == 0.2
    for bad in ("abc", -1.0, "nan"):
        with pytest.raises(ConfigError):
            bench.resolve_dmin(bad, cfg)


@pytest.mark.parametrize("kw", [dict(trials=0), dict(ks=[]), dict(ns=[1]), dict(schemes=["XYZ"]),
                                dict(threads=0), dict(dmins=[0.0])])
def test_invalid_specs(kw):
    with pytest.raises(ConfigError):
        small_spec(**kw).validate()


def test_infeasible_points_are_skipped():
    spec = small_spec(ks=[50, 60], dmins=[0.2])
    points, skipped = spec.sweep_points()
    assert points == [(3, 50, 0.2)]
    assert skipped[0]["K"] == 60


def test_spec_dict_round_trip():
    spec = small_spec()
    again = ExperimentSpec.from_dict(spec.to_dict())
    assert again == spec
    with pytest.raises(ConfigError):
        ExperimentSpec.from_dict({"trails": 3})


def test_one_trial_one_scheme_gives_one_result():
    res = bench.run_experiment(small_spec(trials=1, schemes=["CUP"]))
    assert len(res.trials) == 1
    assert res.trials[0].rate_bits >= 0


def test_aggregates_equal_recomputed_means(tmp_path):
    spec = small_spec(out=str(tmp_path / "r.csv"), aggregates_out=str(tmp_path / "a.csv"))
    res = bench.run_experiment(spec)
    rows = list(csv.DictReader(open(tmp_path / "r.csv")))
    assert len(rows) == 4 * 3
    assert list(rows[0]) == list(bench.CSV_COLUMNS)
    for agg in csv.DictReader(open(tmp_path / "a.csv")):
        rates = [float(r["rate_bits"]) for r in rows if r["scheme"] == agg["scheme"]]
        assert float(agg["mean_rate"]) == pytest.approx(sum(rates) / len(rates), rel=1e-15)
        se = np.std(rates, ddof=1) / np.sqrt(len(rates))
        assert float(agg["stderr"]) == pytest.approx(se, rel=1e-12)
    assert all(a["cap_violations"] == 0 for a in res.aggregates)


def test_csv_floats_round_trip():
    res = bench.run_experiment(small_spec(trials=2))
    rows = list(csv.DictReader(io.StringIO(res.csv_text())))
    for r, t in zip(rows, res.trials):
        assert float(r["rate_bits"]) == t.rate_bits


def test_repeat_runs_identical():
    a = bench.run_experiment(small_spec()).csv_text()
    b = bench.run_experiment(small_spec()).csv_text()
    assert without_timing(a) == without_timing(b)


def test_parallel_matches_sequential():
    seq = bench.run_experiment(small_spec(trials=4))
    par = bench.run_experiment(small_spec(trials=4, threads=2))
    assert without_timing(seq.csv_text()) == without_timing(par.csv_text())


def test_trial_failures_are_recorded(monkeypatch):
    def boom(*args, **kwargs):
        raise FloatingPointError("synthetic")

    monkeypatch.setattr(bench, "solve", boom)
    res = bench.run_experiment(small_spec(trials=2, schemes=["FP"]))
    assert res.trials == [] and len(res.failures) == 2
    assert "synthetic" in res.failures[0]["error"]


def test_sinr_cap_violation_counter():
    assert bench.sinr_cap_violations(np.array([0.6, 0.5, 9.0]), np.array([2, 1, 0])) == 1


def test_convergence_traces_shape():
    run = bench.convergence_traces(SystemConfig(num_waveguides=3), 6, [0.1, 0.2], 2, 0, FAST)
    traces = run.traces
    assert run.placements_checked == 2 * 2 * (FAST.t_max + 1)
    assert run.cap_violations == 0
    assert set(traces) == {0.1, 0.2}
    assert traces[0.1].shape == (2, FAST.t_max + 1)
    text = bench.traces_csv_text(0.1, traces[0.1])
    assert text.splitlines()[0] == "d_min,trial,t,rate_bits"
