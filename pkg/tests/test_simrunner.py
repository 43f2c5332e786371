import json
import os

import numpy as np
import pytest

from conftest import toy_dataset

from collinsim import simrunner
from collinsim.datagen import SETTINGS
from collinsim.methods import MethodSpec
from collinsim.metrics import MetricsReport, ReplicationMetrics
from collinsim.model_core import Dataset, LinearModel, sigmoid
from collinsim.optim import OptimizerConfig
from collinsim.simrunner import (RunConfig, derive_seed, emit_report,
                                 run_repeated_kfold, run_setting)

FAST = OptimizerConfig(max_epochs=250, patience=250)


def _small_config(tmp_path=None, methods=("LR",), reps=2, seed=11):
    return RunConfig(
        setting="A",
        methods=tuple(MethodSpec(m) for m in methods),
        n_reps=reps,
        n_validation=400,
        base_seed=seed,
        output_dir=tmp_path,
        optimizer=FAST,
        population_mc_n=120_000,
    )


class TestRunConfig:
    def test_table_row_a(self):
        spec = SETTINGS["A"]
        assert (spec.n_dev, spec.d, spec.epv, spec.target_median_vif) == (592, 7, 23, 5)

    def test_rejects_single_rep(self):
        with pytest.raises(ValueError):
            RunConfig(setting="A", methods=(MethodSpec("LR"),), n_reps=1)

    def test_rejects_empty_methods(self):
        with pytest.raises(ValueError):
            RunConfig(setting="A", methods=(), n_reps=5)


class TestSeeds:
    def test_rep_seeds_pairwise_distinct(self):
        seeds = [derive_seed(42, 1, r, 0) for r in range(200)]
        assert len(set(seeds)) == len(seeds)

    def test_derivation_stable(self):
        assert derive_seed(7, 1, 2, 3) == derive_seed(7, 1, 2, 3)


class TestRunSetting:
    def test_counting_contract(self, tmp_path):
        config = _small_config(tmp_path)
        reports = run_setting(config)
        assert set(reports) == {"LR"}
        assert len(reports["LR"].per_rep) == 2
        assert np.isfinite(reports["LR"].exjacc)
        raw = (tmp_path / "raw_metrics.csv").read_text().strip().splitlines()
        assert raw[0] == "rep,method,auroc,citl,cslope,r2,coef_mse"
        assert len(raw) == 3  # header + 2 reps x 1 method

    def test_deterministic_output_bytes(self, tmp_path):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        run_setting(_small_config(out1))
        run_setting(_small_config(out2))
        assert (out1 / "raw_metrics.csv").read_bytes() == \
            (out2 / "raw_metrics.csv").read_bytes()
        assert (out1 / "summary.json").read_bytes() == \
            (out2 / "summary.json").read_bytes()

    def test_parallel_schedule_invariance(self, tmp_path, monkeypatch):
        out1, out2 = tmp_path / "serial", tmp_path / "parallel"
        monkeypatch.setenv("COLLIN_WORKERS", "1")
        run_setting(_small_config(out1, reps=3))
        monkeypatch.setenv("COLLIN_WORKERS", "3")
        run_setting(_small_config(out2, reps=3))
        assert (out1 / "raw_metrics.csv").read_bytes() == \
            (out2 / "raw_metrics.csv").read_bytes()

    def test_failed_rep_excluded_with_warning(self, monkeypatch):
        real = simrunner._run_one_rep

        def flaky(args):
            if args[0] == 0:
                raise RuntimeError("synthetic failure")
            return real(args)

        monkeypatch.setattr(simrunner, "_run_one_rep", flaky)
        config = _small_config(reps=11)
        with pytest.warns(UserWarning, match="excluded"):
            reports = run_setting(config)
        assert len(reports["LR"].per_rep) == 10

    def test_too_many_failures_abort(self, monkeypatch):
        def broken(args):
            raise RuntimeError("synthetic failure")

        monkeypatch.setattr(simrunner, "_run_one_rep", broken)
        with pytest.warns(UserWarning):
            with pytest.raises(RuntimeError, match="replications failed"):
                run_setting(_small_config(reps=2))

    def test_tuning_traces_written(self, tmp_path):
        config = _small_config(tmp_path, methods=("Ridge",), reps=2)
        run_setting(config)
        traces = sorted((tmp_path / "tuning").glob("*.csv"))
        assert [p.name for p in traces] == ["rep0000_Ridge.csv", "rep0001_Ridge.csv"]


class TestEmitReport:
    def _fake_reports(self):
        curve = np.array([[0.2, 0.25], [0.6, 0.55]])
        recs = [ReplicationMetrics(r, "LR", 0.8, 0.0, 1.0, 0.3, 0.01, curve)
                for r in range(3)]
        report = MetricsReport("LR", per_rep=recs, exjacc=0.9)
        model = LinearModel(-1.0, [0.2, -0.05, 0.001], ("d1", "d2", "d3"))
        return {"LR": report}, {"LR": [model, model]}

    def test_dose_summary_rows(self, tmp_path):
        reports, models = self._fake_reports()
        emit_report(reports, tmp_path, models,
                    dose_mask=np.array([True, True, True]),
                    feature_names=("d1", "d2", "d3"))
        rows = {}
        for line in (tmp_path / "coefficients.csv").read_text().splitlines()[1:]:
            method, term, mean, lo, hi = line.split(",")
            rows[term] = float(mean)
        # dose coefficients [0.2, -0.05, 0.001] with the 0.01 threshold
        assert rows["sum_beta_neg"] == pytest.approx(-0.05)
        assert rows["sum_beta_pos"] == pytest.approx(0.2)
        assert rows["prop_beta_neg"] == pytest.approx(1 / 3)
        assert rows["prop_beta_pos"] == pytest.approx(1 / 3)
        assert rows["Intercept"] == pytest.approx(-1.0)
        assert set(rows) >= {"d1", "d2", "d3"}

    def test_raw_csv_row_count(self, tmp_path):
        reports, models = self._fake_reports()
        emit_report(reports, tmp_path, models,
                    dose_mask=np.zeros(3, bool), feature_names=("d1", "d2", "d3"))
        raw = (tmp_path / "raw_metrics.csv").read_text().strip().splitlines()
        assert len(raw) == 4  # header + 3 reps
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["LR"]["exjacc"]["mean"] == 0.9
        cal = (tmp_path / "calibration_LR.csv").read_text().strip().splitlines()
        assert cal[0] == "rep,predicted,observed"
        assert len(cal) == 1 + 3 * 2

    def test_empty_reports_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            emit_report({}, tmp_path, {}, np.zeros(1, bool), ("a",))


class TestRepeatedKfold:
    def _observed(self, n=300, seed=91):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((n, 3))
        y = (rng.random(n) < sigmoid(X @ np.array([1.0, -0.6, 0.3]))).astype(float)
        return Dataset(X, y, ("a", "b", "c"), np.array([True, False, False]))

    def test_partition_and_model_count(self):
        data = self._observed()
        reports = run_repeated_kfold(data, [MethodSpec("LR")], k=5, n_reps=1,
                                     base_seed=1, optimizer=FAST)
        assert len(reports["LR"].per_rep) == 1
        # 5 folds -> 5 fitted models feed selection stability
        assert np.isfinite(reports["LR"].exjacc)

    def test_every_row_held_out_once(self):
        data = self._observed(n=103)
        parts = simrunner._partition_with_both_classes(data, 5, base_seed=2, rep=0)
        joined = np.sort(np.concatenate(parts))
        np.testing.assert_array_equal(joined, np.arange(103))

    def test_coef_mse_omitted(self):
        data = self._observed()
        reports = run_repeated_kfold(data, [MethodSpec("LR")], k=3, n_reps=2,
                                     base_seed=3, optimizer=FAST)
        assert all(np.isnan(r.coef_mse) for r in reports["LR"].per_rep)

    def test_degenerate_leave_one_out_rejected(self):
        # a single positive: whichever fold holds it leaves a one-class
        # training split, for every shuffle
        X = np.arange(12, dtype=float).reshape(6, 2)
        y = np.zeros(6)
        y[2] = 1.0
        data = Dataset(X, y, ("a", "b"), np.zeros(2, bool))
        with pytest.raises(RuntimeError, match="two-class"):
            run_repeated_kfold(data, [MethodSpec("LR")], k=6, n_reps=1,
                               base_seed=4, optimizer=FAST)

    def test_deterministic(self):
        data = self._observed()
        r1 = run_repeated_kfold(data, [MethodSpec("LR")], k=3, n_reps=2,
                                base_seed=5, optimizer=FAST)
        r2 = run_repeated_kfold(data, [MethodSpec("LR")], k=3, n_reps=2,
                                base_seed=5, optimizer=FAST)
        assert r1["LR"].values("auroc").tolist() == r2["LR"].values("auroc").tolist()
