"""
Tests for the experiment runner, the results CSV and the command line.
"""

import importlib.util
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from src import experiment_runner
from src.decision_losses import DownstreamLoss
from src.experiment_config import parse_config
from src.experiment_runner import (
    EXIT_CONFIG_ERROR,
    EXIT_OK,
    EXIT_RUNTIME_FAILURE,
    hyperparams_for,
    method_runs,
    prepare_split,
    repetition_seed,
    run,
    timing_report,
)
from src.results_history import METRIC_COLUMNS, RESULTS_COLUMNS, load_results_csv, method_medians, validate_results

ROOT = Path(__file__).resolve().parent.parent

SMALL = """
schema_version = 1
name = small_sp
problem = shortest_path
grid = 3, 3
n_train = 40
n_test = 20
p = 3
deg = 2
noise_width = 0.25
methods = 2s-lr, spo+, dbb
lambda = 10
epochs = 2
repetitions = 2
seed = 7
"""


def load_script(name):
    spec = importlib.util.spec_from_file_location(name, ROOT / "scripts" / f"{name}.py")
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def metric_frame(path):
    df = load_results_csv(str(path))
    return df[["method", "repetition", "seed"] + METRIC_COLUMNS]


def test_repetition_seeds_are_stable_and_distinct():
    assert repetition_seed(7, 0) == repetition_seed(7, 0)
    assert len({repetition_seed(7, r) for r in range(10)}) == 10


def test_split_sizes_and_order():
    cfg = parse_config(SMALL + "n_val = 10\n")
    split = prepare_split(cfg, seed=3, pool_workers=1)
    assert (len(split.train), len(split.val), len(split.test)) == (40, 10, 20)
    again = prepare_split(cfg, seed=3, pool_workers=1)
    assert np.array_equal(split.test.costs, again.test.costs)
    assert split.train.fingerprint == split.oracle.fingerprint()


def test_small_run_writes_results(tmp_path):
    cfg = parse_config(SMALL)
    outcome = run(cfg, out=str(tmp_path))
    assert outcome.exit_code == EXIT_OK
    assert outcome.results_path == tmp_path / "small_sp.csv"
    df = load_results_csv(str(outcome.results_path))
    assert len(df) == 6
    assert list(df.columns) == list(RESULTS_COLUMNS)
    assert set(df["status"]) == {"ok"}
    assert (df["normalized_regret"] >= 0).all()
    assert df.loc[df["method"] == "2s-lr", "note"].str.contains("scikit-learn").all()
    assert validate_results(str(outcome.results_path)) == {"errors": [], "warnings": []}

    medians = method_medians(df)
    assert sorted(medians["method"]) == ["2s-lr", "dbb", "spo+"]
    assert (medians["runs"] == 2).all()


def test_same_seed_same_metrics(tmp_path):
    cfg = parse_config(SMALL.replace("repetitions = 2", "repetitions = 1"))
    run(cfg, out=str(tmp_path / "a"))
    run(cfg, out=str(tmp_path / "b"))
    pd.testing.assert_frame_equal(metric_frame(tmp_path / "a" / "small_sp.csv"),
                                  metric_frame(tmp_path / "b" / "small_sp.csv"))


def test_worker_count_does_not_change_metrics(tmp_path):
    cfg = parse_config(SMALL.replace("repetitions = 2", "repetitions = 1").replace("spo+, dbb", "spo+, pfyl"))
    run(cfg, workers=1, out=str(tmp_path / "one"))
    run(cfg, workers=2, out=str(tmp_path / "two"))
    pd.testing.assert_frame_equal(metric_frame(tmp_path / "one" / "small_sp.csv"),
                                  metric_frame(tmp_path / "two" / "small_sp.csv"))


def test_rerun_overwrites_unless_appending(tmp_path):
    cfg = parse_config(SMALL.replace("repetitions = 2", "repetitions = 1").replace("2s-lr, spo+, dbb", "2s-lr"))
    run(cfg, out=str(tmp_path))
    run(cfg, out=str(tmp_path))
    assert len(load_results_csv(str(tmp_path / "small_sp.csv"))) == 1
    run(cfg, out=str(tmp_path), append=True)
    assert len(load_results_csv(str(tmp_path / "small_sp.csv"))) == 2


def test_phi_sweep_expands_rows(tmp_path):
    text = SMALL.replace("repetitions = 2", "repetitions = 1").replace("2s-lr, spo+, dbb", "spo+, spo+-l2")
    cfg = parse_config(text + "phi_sweep = 0.1, 1\n")
    assert [(s.name, phi) for s, phi in method_runs(cfg)] == [("spo+", None), ("spo+-l2", 0.1), ("spo+-l2", 1.0)]
    df = load_results_csv(str(run(cfg, out=str(tmp_path)).results_path))
    assert df["phi2"].tolist() == [0.0, 0.1, 1.0]


def test_failed_method_is_recorded(tmp_path, monkeypatch):
    cfg = parse_config(SMALL.replace("repetitions = 2", "repetitions = 1"))
    real = experiment_runner.run_method

    def flaky(cfg, spec, *args, **kwargs):
        if spec.name == "dbb":
            raise RuntimeError("solver crashed")
        return real(cfg, spec, *args, **kwargs)

    monkeypatch.setattr(experiment_runner, "run_method", flaky)
    outcome = run(cfg, out=str(tmp_path))
    assert outcome.failures == 1
    assert outcome.exit_code == EXIT_RUNTIME_FAILURE
    df = load_results_csv(str(outcome.results_path))
    failed = df[df["status"] == "failed"]
    assert failed["method"].tolist() == ["dbb"]
    assert "solver crashed" in failed["error"].iloc[0]
    assert validate_results(str(outcome.results_path))["warnings"]


def test_relaxed_knapsack_run(tmp_path):
    text = """
    schema_version = 1
    name = tiny_knapsack
    problem = knapsack
    num_items = 8
    num_resources = 2
    capacity = 15
    n_train = 30
    n_test = 10
    p = 3
    methods = spo+-rel, 2s-knn
    epochs = 1
    unambiguous = true
    """
    outcome = run(parse_config(text), out=str(tmp_path))
    assert outcome.exit_code == EXIT_OK
    df = load_results_csv(str(outcome.results_path))
    assert df["normalized_unambiguous_regret"].notna().all()
    assert (df["normalized_unambiguous_regret"] >= df["normalized_regret"] - 1e-9).all()
    # evaluation details from the report reach the CSV
    assert (df["eval_time"] > 0).all()
    assert (df["unambiguous_fallbacks"] == 0).all()
    assert df["rounded_solutions"].tolist() == [False, False]
    assert df["total_time"].ge(df["eval_time"]).all()


def test_downstream_key_reaches_training(tmp_path):
    base = SMALL.replace("repetitions = 2", "repetitions = 1").replace("2s-lr, spo+, dbb", "dbb")
    hamming = parse_config(base + "downstream = hamming\n")
    spec = hamming.method_specs[0]
    assert hyperparams_for(hamming, spec, None).downstream is DownstreamLoss.HAMMING
    assert hyperparams_for(parse_config(base), spec, None).downstream is None

    a = run(hamming, out=str(tmp_path / "hamming"))
    b = run(parse_config(base + "downstream = regret\n"), out=str(tmp_path / "regret"))
    assert a.exit_code == b.exit_code == EXIT_OK
    mse_hamming = load_results_csv(str(a.results_path))["mse"].iloc[0]
    mse_regret = load_results_csv(str(b.results_path))["mse"].iloc[0]
    assert mse_hamming != mse_regret


def test_timing_report_columns():
    cfg = parse_config(SMALL.replace("2s-lr, spo+, dbb", "spo+"))
    table = timing_report(cfg, worker_counts=(1,), epochs=2)
    assert list(table.columns) == ["method", "phi", "workers", "epochs", "epoch_time_mean", "epoch_time_sd"]
    assert table["epochs"].tolist() == [2]
    assert (table["epoch_time_mean"] > 0).all()


class TestCommandLine:

    def test_validate_ok(self, capsys):
        bench = load_script("dfl_bench")
        assert bench.main(["validate", str(ROOT / "configs" / "sp_5x5_deg4.cfg")]) == EXIT_OK
        assert "name = sp_5x5_deg4" in capsys.readouterr().out

    def test_invalid_config_exit_code(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text(SMALL.replace("spo+, dbb", "spo+-rel"))
        bench = load_script("dfl_bench")
        assert bench.main(["run", str(path), "--out", str(tmp_path)]) == EXIT_CONFIG_ERROR
        assert "no distinct relaxation" in capsys.readouterr().out

    def test_run_exit_code(self, tmp_path):
        path = tmp_path / "small_sp.cfg"
        path.write_text(SMALL.replace("repetitions = 2", "repetitions = 1").replace("2s-lr, spo+, dbb", "spo+"))
        bench = load_script("dfl_bench")
        assert bench.main(["run", str(path), "--out", str(tmp_path / "out")]) == EXIT_OK
        assert (tmp_path / "out" / "small_sp.csv").exists()

    def test_timing_uses_seed_override(self, tmp_path, monkeypatch):
        path = tmp_path / "small_sp.cfg"
        path.write_text(SMALL.replace("repetitions = 2", "repetitions = 1").replace("2s-lr, spo+, dbb", "spo+"))
        bench = load_script("dfl_bench")
        seen = []

        def fake_timing(cfg, worker_counts):
            seen.append(cfg.seed)
            return pd.DataFrame({"method": ["spo+"], "epoch_time_mean": [0.1]})

        monkeypatch.setattr(bench, "timing_report", fake_timing)
        argv = ["run", str(path), "--out", str(tmp_path / "out"), "--seed", "99", "--timing"]
        assert bench.main(argv) == EXIT_OK
        assert seen == [99]
        assert load_results_csv(str(tmp_path / "out" / "small_sp.csv"))["seed"].iloc[0] == repetition_seed(99, 0)
        assert (tmp_path / "out" / "small_sp_timing.csv").exists()

    def test_viewer_summary(self, tmp_path, capsys):
        cfg = parse_config(SMALL.replace("repetitions = 2", "repetitions = 1"))
        outcome = run(cfg, out=str(tmp_path))
        viewer = load_script("view_results")
        assert viewer.main([str(outcome.results_path), "--format", "summary"]) == 0
        assert "spo+" in capsys.readouterr().out

    def test_generate_dataset_script(self, tmp_path):
        from src.decision_dataset import load
        from src.shortest_path_solver import GridSpec, ShortestPathOracle

        generator = load_script("generate_dataset")
        out = tmp_path / "sp.dfld"
        argv = ["shortest_path", "--grid", "3", "3", "-n", "12", "-p", "2", "--seed", "4", "--out", str(out), "--csv"]
        assert generator.main(argv) == 0
        ds = load(out, ShortestPathOracle(GridSpec(3, 3)))
        assert (len(ds), ds.num_feat, ds.num_cost) == (12, 2, 12)
        assert out.with_suffix(".csv").exists()
