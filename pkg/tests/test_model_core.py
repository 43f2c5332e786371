import numpy as np
import pytest

from collinsim.model_core import (Dataset, LinearModel, load_dataset_csv,
                                  predict_risk, sigmoid, standardize_fit)


class TestSigmoid:
    def test_symmetry_point(self):
        assert sigmoid(0.0) == 0.5

    def test_saturation(self):
        assert abs(sigmoid(50.0) - 1.0) < 1e-12

    def test_hand_value(self):
        # solve 1/(1+e^-z) = 0.75  =>  z = ln 3
        assert sigmoid(np.log(3.0)) == pytest.approx(0.75, abs=1e-12)

    def test_range_and_complement(self, rng):
        # |z| <= 36 keeps 1 - sigmoid(z) representable in float64; beyond
        # that the function saturates to the nearest float
        z = rng.uniform(-36, 36, size=5000)
        s = sigmoid(z)
        assert np.all(s > 0) and np.all(s < 1)
        np.testing.assert_allclose(s + sigmoid(-z), 1.0, atol=1e-12)

    def test_strictly_increasing(self):
        z = np.linspace(-30, 30, 2001)
        assert np.all(np.diff(sigmoid(z)) > 0)


class TestPredictRisk:
    def test_zero_model(self, rng):
        model = LinearModel(0.0, np.zeros(4), list("abcd"))
        X = rng.standard_normal((7, 4))
        np.testing.assert_array_equal(predict_risk(model, X), np.full(7, 0.5))

    def test_hand_values(self):
        model = LinearModel(0.0, [1.0], ["x"])
        p = predict_risk(model, [[0.0], [np.log(3.0)]])
        np.testing.assert_allclose(p, [0.5, 0.75], atol=1e-12)

    def test_duplicate_rows_identical(self, rng):
        model = LinearModel(0.3, rng.standard_normal(3), list("abc"))
        row = rng.standard_normal(3)
        p = predict_risk(model, np.vstack([row, row]))
        assert p[0] == p[1]

    def test_dimension_mismatch_message(self):
        model = LinearModel(0.0, np.zeros(3), list("abc"))
        with pytest.raises(ValueError, match="2.*3|3.*2"):
            predict_risk(model, np.zeros((5, 2)))


class TestStandardize:
    def test_two_point_column(self):
        params = standardize_fit(np.array([[1.0], [3.0]]))
        assert params.means[0] == 2.0
        assert params.sds[0] == 1.0  # population convention: divide by n

    def test_already_standardized(self, rng):
        X = rng.standard_normal((500, 3))
        X = (X - X.mean(axis=0)) / X.std(axis=0)
        params = standardize_fit(X)
        np.testing.assert_allclose(params.means, 0.0, atol=1e-10)
        np.testing.assert_allclose(params.sds, 1.0, atol=1e-10)

    def test_constant_column_error_names_column(self):
        X = np.column_stack([np.arange(3.0), np.zeros(3)])
        with pytest.raises(ValueError, match="bad_col"):
            standardize_fit(X, feature_names=["ok", "bad_col"])

    def test_transform_has_unit_moments(self, rng):
        X = rng.normal(5.0, 3.0, size=(200, 4))
        params = standardize_fit(X)
        Z = params.apply(X)
        assert np.max(np.abs(Z.mean(axis=0))) < 1e-10
        assert np.max(np.abs(Z.std(axis=0) - 1.0)) < 1e-10

    def test_round_trip_identity(self, rng):
        X = rng.normal(-2.0, 7.0, size=(50, 3))
        params = standardize_fit(X)
        back = params.invert(params.apply(X))
        np.testing.assert_allclose(back, X, rtol=1e-12, atol=1e-12)

    def test_prediction_invariant_under_standardization(self, rng):
        # standardizing X while rewriting (beta, beta0) accordingly must not
        # change any predicted risk
        for _ in range(10):
            n, d = 40, 4
            X = rng.normal(2.0, 3.0, size=(n, d))
            beta = rng.standard_normal(d)
            beta0 = rng.standard_normal()
            params = standardize_fit(X)
            model_raw = LinearModel(beta0, beta, [f"x{i}" for i in range(d)])
            beta_std = beta * params.sds
            beta0_std = beta0 + float(beta @ params.means)
            model_std = LinearModel(beta0_std, beta_std, model_raw.feature_names)
            diff = np.abs(predict_risk(model_raw, X)
                          - predict_risk(model_std, params.apply(X)))
            assert diff.max() < 1e-10


class TestDataset:
    def test_rejects_non_binary_outcome(self):
        with pytest.raises(ValueError, match="0/1"):
            Dataset(np.zeros((2, 1)), [0.0, 0.5], ["a"], [False])

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="finite"):
            Dataset([[np.inf]], [1.0], ["a"], [False])

    def test_rejects_length_mismatches(self):
        with pytest.raises(ValueError):
            Dataset(np.zeros((2, 2)), [0.0, 1.0], ["a"], [False, True])
        with pytest.raises(ValueError):
            Dataset(np.zeros((2, 2)), [0.0, 1.0], ["a", "b"], [False])
        with pytest.raises(ValueError):
            Dataset(np.zeros((3, 2)), [0.0, 1.0], ["a", "b"], [False, True])


class TestCsvLoading:
    def test_load_with_dose_sidecar(self, tmp_path):
        data_file = tmp_path / "d.csv"
        data_file.write_text("age,dose_a,outcome\n1.0,2.0,1\n3.0,4.0,0\n0.5,1.5,1\n")
        sidecar = tmp_path / "dose.txt"
        sidecar.write_text("dose_a\n")
        data = load_dataset_csv(data_file, sidecar)
        assert data.feature_names == ("age", "dose_a")
        np.testing.assert_array_equal(data.dose_mask, [False, True])
        np.testing.assert_array_equal(data.y, [1.0, 0.0, 1.0])

    def test_missing_outcome_column(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError, match="outcome"):
            load_dataset_csv(f)

    def test_unknown_dose_name(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("a,outcome\n1,0\n2,1\n")
        s = tmp_path / "dose.txt"
        s.write_text("nope\n")
        with pytest.raises(ValueError, match="nope"):
            load_dataset_csv(f, s)
