"""Core data containers, the logistic link, and predictor standardization.

Everything downstream (losses, fitting methods, the simulation engine)
works in terms of the three containers defined here:

* :class:`Dataset` -- predictor matrix, binary outcome, names, dose mask.
* :class:`LinearModel` -- intercept plus coefficient vector on the
  standardized predictor scale.
* :class:`StandardizationParams` -- per-column location/scale fitted on a
  training matrix and applied unchanged to validation data.

All functions are pure and safe to call from concurrent workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Dataset",
    "LinearModel",
    "StandardizationParams",
    "sigmoid",
    "predict_risk",
    "standardize_fit",
    "load_dataset_csv",
]


def sigmoid(z):
    """Logistic function 1 / (1 + exp(-z)), elementwise.

    Saturates smoothly for large |z|; never returns exactly 0 or 1 for
    finite input in float64 until ~|z| > 36, where it returns the nearest
    representable value.
    """
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class Dataset:
    """A design matrix with a binary outcome.

    Attributes
    ----------
    X : ndarray, shape (n, d)
        Predictor values, finite.
    y : ndarray, shape (n,)
        Outcome labels, each exactly 0 or 1.
    feature_names : tuple of str, length d
    dose_mask : ndarray of bool, length d
        True marks an organ-at-risk dose predictor (eligible for
        non-negativity constraints).
    """

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple
    dose_mask: np.ndarray

    def __post_init__(self):
        X = np.ascontiguousarray(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        names = tuple(str(n) for n in self.feature_names)
        mask = np.asarray(self.dose_mask, dtype=bool).ravel()
        if X.ndim != 2:
            raise ValueError(f"X must be 2-D, got shape {X.shape}")
        n, d = X.shape
        if not np.all(np.isfinite(X)):
            raise ValueError("X contains non-finite entries")
        if y.shape[0] != n:
            raise ValueError(f"y has {y.shape[0]} rows, X has {n}")
        if not np.all((y == 0.0) | (y == 1.0)):
            raise ValueError("y must contain only 0/1 values")
        if len(names) != d:
            raise ValueError(f"{len(names)} feature names for {d} columns")
        if mask.shape[0] != d:
            raise ValueError(f"dose_mask length {mask.shape[0]} != {d} columns")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "dose_mask", mask)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def subset(self, rows) -> "Dataset":
        """Row subset (e.g. a CV fold), sharing names and dose mask."""
        return Dataset(self.X[rows], self.y[rows], self.feature_names, self.dose_mask)


@dataclass(frozen=True)
class LinearModel:
    """Intercept + coefficients of a logistic risk model.

    Coefficients live on the standardized predictor scale; use
    :func:`predict_risk` to turn standardized rows into risks.
    """

    intercept: float
    coefficients: np.ndarray
    feature_names: tuple

    def __post_init__(self):
        coefs = np.asarray(self.coefficients, dtype=float).ravel()
        names = tuple(str(n) for n in self.feature_names)
        if len(names) != coefs.shape[0]:
            raise ValueError(
                f"{coefs.shape[0]} coefficients but {len(names)} feature names"
            )
        if not np.isfinite(self.intercept) or not np.all(np.isfinite(coefs)):
            raise ValueError("model parameters must be finite")
        object.__setattr__(self, "intercept", float(self.intercept))
        object.__setattr__(self, "coefficients", coefs)
        object.__setattr__(self, "feature_names", names)

    @property
    def d(self) -> int:
        return self.coefficients.shape[0]


def predict_risk(model: LinearModel, X: np.ndarray) -> np.ndarray:
    """Predicted outcome probabilities sigmoid(X @ beta + beta0), one per row."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.d:
        actual = X.shape[1] if X.ndim == 2 else X.shape
        raise ValueError(
            f"X has {actual} columns, model expects {model.d}"
        )
    return sigmoid(X @ model.coefficients + model.intercept)


@dataclass(frozen=True)
class StandardizationParams:
    """Column means and standard deviations fitted on a training matrix.

    The sd convention divides by n (population form) so that a transformed
    training column has unit variance exactly.
    """

    means: np.ndarray
    sds: np.ndarray

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float).ravel()
        sds = np.asarray(self.sds, dtype=float).ravel()
        if means.shape != sds.shape:
            raise ValueError("means and sds must have equal length")
        if np.any(sds <= 0):
            raise ValueError("all sds must be strictly positive")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "sds", sds)

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.means) / self.sds

    def invert(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=float) * self.sds + self.means

    def apply_dataset(self, data: Dataset) -> Dataset:
        return Dataset(self.apply(data.X), data.y, data.feature_names, data.dose_mask)


def standardize_fit(X: np.ndarray, feature_names=None) -> StandardizationParams:
    """Fit zero-mean/unit-variance parameters on a training matrix.

    Raises on constant columns (zero sd), naming the offending column.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need a 2-D matrix with at least 2 rows")
    means = X.mean(axis=0)
    sds = X.std(axis=0)  # population convention (divide by n)
    bad = np.flatnonzero(sds == 0)
    if bad.size:
        j = int(bad[0])
        name = feature_names[j] if feature_names is not None else f"column {j}"
        raise ValueError(f"constant column cannot be standardized: {name}")
    return StandardizationParams(means, sds)


def load_dataset_csv(path, dose_names_path=None) -> Dataset:
    """Load a dataset from CSV.

    First row holds feature names plus a final column named ``outcome``.
    An optional sidecar file lists dose-predictor names, one per line,
    from which the dose mask is built (no sidecar means all False).
    """
    path = Path(path)
    with open(path) as f:
        header = f.readline().strip().split(",")
        body = np.loadtxt(f, delimiter=",", ndmin=2)
    if not header or header[-1] != "outcome":
        raise ValueError(f"{path}: last CSV column must be named 'outcome'")
    names = tuple(header[:-1])
    if body.shape[1] != len(header):
        raise ValueError(f"{path}: {body.shape[1]} columns but {len(header)} header fields")
    X, y = body[:, :-1], body[:, -1]
    if dose_names_path is not None:
        with open(dose_names_path) as f:
            dose = {line.strip() for line in f if line.strip()}
        unknown = dose - set(names)
        if unknown:
            raise ValueError(f"dose names not in dataset: {sorted(unknown)}")
        mask = np.array([n in dose for n in names])
    else:
        mask = np.zeros(len(names), dtype=bool)
    return Dataset(X, y, names, mask)
