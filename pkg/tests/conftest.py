import numpy as np
import pytest

from collinsim.model_core import Dataset, sigmoid


def central_difference(obj, params, h=1e-5):
    """Finite-difference gradient oracle, independent of any analytic path."""
    params = np.asarray(params, dtype=float)
    grad = np.empty_like(params)
    for i in range(params.size):
        up = params.copy()
        dn = params.copy()
        up[i] += h
        dn[i] -= h
        grad[i] = (obj(up)[0] - obj(dn)[0]) / (2.0 * h)
    return grad


def max_relative_error(analytic, numeric):
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1.0)
    return float(np.max(np.abs(analytic - numeric) / denom))


def toy_dataset(seed=0, n=120, d=3, coefs=None, intercept=-0.2, dose=None):
    """Small logistic dataset with known generating coefficients."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    X = (X - X.mean(axis=0)) / X.std(axis=0)
    coefs = np.linspace(1.0, -0.5, d) if coefs is None else np.asarray(coefs, float)
    y = (rng.random(n) < sigmoid(X @ coefs + intercept)).astype(float)
    if y.min() == y.max():  # extremely unlikely at these sizes
        y[0] = 1.0 - y[0]
    names = tuple(f"x{i}" for i in range(d))
    dose = np.zeros(d, dtype=bool) if dose is None else np.asarray(dose, bool)
    return Dataset(X, y, names, dose)


@pytest.fixture
def rng():
    return np.random.default_rng(20240810)
