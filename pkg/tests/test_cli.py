import json

import numpy as np
import pytest

from collinsim.cli import main
from collinsim.datagen import bundled_correlation
from collinsim.model_core import sigmoid


@pytest.fixture
def corr_file(tmp_path):
    corr, names = bundled_correlation("A")
    path = tmp_path / "corr_A.csv"
    with open(path, "w") as f:
        f.write(",".join(names) + "\n")
        for row in corr:
            f.write(",".join(f"{v:.2f}" for v in row) + "\n")
    return path


@pytest.fixture
def data_file(tmp_path):
    rng = np.random.default_rng(101)
    n = 240
    X = rng.standard_normal((n, 3))
    y = (rng.random(n) < sigmoid(X @ np.array([1.0, -0.5, 0.3]))).astype(int)
    path = tmp_path / "data.csv"
    with open(path, "w") as f:
        f.write("age,dose_a,dose_b,outcome\n")
        for row, yi in zip(X, y):
            f.write(",".join(f"{v:.6f}" for v in row) + f",{yi}\n")
    dose = tmp_path / "dose.txt"
    dose.write_text("dose_a\ndose_b\n")
    return path, dose


class TestVifCommand:
    def test_prints_median(self, corr_file, capsys):
        assert main(["vif", "--corr", str(corr_file)]) == 0
        out = capsys.readouterr().out.strip().splitlines()
        assert len(out) == 8  # 7 predictors + median line
        label, value = out[-1].split(",")
        assert label == "median"
        assert float(value) == pytest.approx(5.0, rel=0.25)


class TestScaleCommand:
    def test_solves_and_writes(self, corr_file, tmp_path, capsys):
        out_file = tmp_path / "scaled.csv"
        assert main(["scale", "--corr", str(corr_file), "--target-vif", "43",
                     "--out", str(out_file)]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        values = dict(line.split(",") for line in lines)
        assert float(values["scale"]) > 1.0
        assert float(values["median_vif"]) == pytest.approx(43.0, rel=0.10)
        header = out_file.read_text().splitlines()[0]
        assert header.split(",")[1] == "Subm.L.Dm"


class TestFitCommand:
    def test_fit_ridge_writes_model(self, data_file, tmp_path, capsys):
        data, dose = data_file
        out = tmp_path / "fit_out"
        rc = main(["fit", "--data", str(data), "--method", "ridge",
                   "--c-l2", "10", "--dose-names", str(dose), "--out", str(out)])
        assert rc == 0
        payload = json.loads((out / "model_Ridge.json").read_text())
        assert set(payload["coefficients"]) == {"age", "dose_a", "dose_b"}
        printed = json.loads(capsys.readouterr().out)
        assert printed == payload

    def test_unknown_method_exits(self, data_file):
        data, _ = data_file
        with pytest.raises(SystemExit):
            main(["fit", "--data", str(data), "--method", "gbm"])


class TestTuneCommand:
    def test_tune_lasso(self, data_file, tmp_path, capsys):
        data, _ = data_file
        out = tmp_path / "tune_out"
        rc = main(["tune", "--data", str(data), "--method", "lasso",
                   "--seed", "7", "--out", str(out)])
        assert rc == 0
        result = json.loads(capsys.readouterr().out)
        assert 1e-3 <= result["best_params"]["c_l1"] <= 1e2
        assert result["n_trials"] == 15
        trace = (out / "tune_trace_Lasso.csv").read_text().splitlines()
        assert trace[0] == "trial_index,c_l1,mean_heldout_loglik"
        assert len(trace) == 16


class TestEvalCommand:
    def test_repeated_kfold(self, data_file, tmp_path, capsys):
        data, dose = data_file
        out = tmp_path / "eval_out"
        rc = main(["eval", "--data", str(data), "--kfold", "3", "--repeats", "2",
                   "--methods", "LR", "--dose-names", str(dose),
                   "--seed", "3", "--out", str(out)])
        assert rc == 0
        assert (out / "raw_metrics.csv").exists()
        assert "LR: mean AUROC" in capsys.readouterr().out


class TestSimulateCommand:
    def test_small_run(self, tmp_path, capsys):
        out = tmp_path / "sim_out"
        rc = main(["simulate", "--setting", "A", "--reps", "2", "--seed", "5",
                   "--methods", "LR,Ridge", "--validation", "300",
                   "--out", str(out)])
        assert rc == 0
        raw = (out / "raw_metrics.csv").read_text().strip().splitlines()
        assert len(raw) == 1 + 2 * 2
        stdout = capsys.readouterr().out
        assert "LR: mean AUROC" in stdout and "Ridge: mean AUROC" in stdout
        assert (out / "summary.json").exists()
        assert (out / "coefficients.csv").exists()
        assert (out / "calibration_LR.csv").exists()
