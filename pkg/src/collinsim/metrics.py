"""Performance measures for binary risk models.

Discrimination (AUROC), calibration (calibration-in-the-large and slope
via logistic recalibration), explained variation (Nagelkerke R-squared),
coefficient recovery (mean squared error against a known model), selection
stability (mean Jaccard index of thresholded coefficient signs across
repeated fits), lowess-smoothed calibration curves, and percentile
confidence intervals over replications.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from . import _kernels
from .model_core import LinearModel

__all__ = [
    "MetricsReport",
    "ReplicationMetrics",
    "auroc",
    "calibration_intercept_slope",
    "nagelkerke_r2",
    "coef_mse",
    "sign",
    "exjacc",
    "lowess_curve",
    "percentile_ci",
]

PROB_CLAMP = 1e-12
SIGN_THRESHOLD = 0.01


def _check_binary(y):
    y = np.asarray(y, dtype=float).ravel()
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("y must be binary 0/1")
    if y.min() == y.max():
        raise ValueError("both outcome classes must be present")
    return y


def auroc(predicted, y) -> float:
    """Area under the ROC curve as the Mann-Whitney probability.

    Equals the mean over (positive, negative) pairs of
    1[p_pos > p_neg] + 0.5 * 1[p_pos = p_neg]; computed via average ranks,
    which reproduces the pairwise count exactly.
    """
    p = np.asarray(predicted, dtype=float).ravel()
    y = _check_binary(y)
    if p.shape != y.shape:
        raise ValueError("predicted and y must have equal length")
    ranks = rankdata(p, method="average")  # ties get half-integer ranks
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    rank_sum = float(ranks[y == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def _newton_logistic(Z, y, offset, max_iter=100, tol=1e-10):
    """Newton-Raphson for a small logistic regression with a fixed offset."""
    beta = np.zeros(Z.shape[1])
    for _ in range(max_iter):
        eta = Z @ beta + offset
        p = 1.0 / (1.0 + np.exp(-eta))
        W = p * (1.0 - p)
        grad = Z.T @ (y - p)
        H = (Z * W[:, None]).T @ Z
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            raise RuntimeError("calibration fit did not converge (singular Hessian)")
        beta = beta + step
        if np.max(np.abs(step)) < tol:
            return beta
    raise RuntimeError("calibration fit did not converge")


def calibration_intercept_slope(predicted, y):
    """(calibration-in-the-large, calibration slope) of predictions.

    The slope is the coefficient of the logistic regression of y on
    logit(p); the intercept is refit with logit(p) as a fixed offset.
    Ideal values are 0 and 1.
    """
    p = np.clip(np.asarray(predicted, dtype=float).ravel(), PROB_CLAMP, 1 - PROB_CLAMP)
    y = _check_binary(y)
    logit = np.log(p / (1.0 - p))
    Z = np.column_stack([np.ones_like(logit), logit])
    slope_fit = _newton_logistic(Z, y, np.zeros_like(logit))
    cslope = float(slope_fit[1])
    citl_fit = _newton_logistic(np.ones((y.size, 1)), y, logit)
    citl = float(citl_fit[0])
    return citl, cslope


def _log_likelihood(p, y):
    pc = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return float(np.sum(y * np.log(pc) + (1 - y) * np.log(1 - pc)))


def nagelkerke_r2(predicted, y) -> float:
    """Nagelkerke R-squared: the Cox-Snell ratio rescaled to a maximum of 1.

    Zero when predictions equal the base rate, at most 1.
    """
    p = np.asarray(predicted, dtype=float).ravel()
    y = _check_binary(y)
    n = y.size
    ll_null = _log_likelihood(np.full(n, y.mean()), y)
    ll_model = _log_likelihood(p, y)
    cox_snell = 1.0 - math.exp(2.0 * (ll_null - ll_model) / n)
    max_cs = 1.0 - math.exp(2.0 * ll_null / n)
    return cox_snell / max_cs


def coef_mse(estimated: LinearModel, truth: LinearModel) -> float:
    """Mean squared error over the d coefficients; the intercept is excluded."""
    if estimated.feature_names != truth.feature_names:
        raise ValueError("models have different features "
                         f"({estimated.feature_names} vs {truth.feature_names})")
    diff = estimated.coefficients - truth.coefficients
    return float(np.mean(diff * diff))


def sign(x: float) -> int:
    """Direction of effect with a +-0.01 dead zone (strict inequalities)."""
    if x < -SIGN_THRESHOLD:
        return -1
    if x > SIGN_THRESHOLD:
        return 1
    return 0


def _sign_vector(coefs):
    s = np.zeros(len(coefs), dtype=int)
    s[np.asarray(coefs) < -SIGN_THRESHOLD] = -1
    s[np.asarray(coefs) > SIGN_THRESHOLD] = 1
    return s


def exjacc(models) -> float:
    """Mean Jaccard index of the included-coefficient sign sets over all
    unordered model pairs.

    A coefficient is included when its sign (thresholded at 0.01) is
    nonzero; two models with no included coefficients at all agree
    perfectly and score 1.
    """
    models = list(models)
    if len(models) < 2:
        raise ValueError("need at least 2 models")
    d = models[0].d
    if any(m.d != d for m in models):
        raise ValueError("models must have equal dimension")
    signs = np.array([_sign_vector(m.coefficients) for m in models])
    sizes = (signs != 0).sum(axis=1)
    total = 0.0
    n_pairs = 0
    for i in range(len(models)):
        for j in range(i + 1, len(models)):
            si, sj = signs[i], signs[j]
            inter = int(np.sum((si == sj) & (si != 0)))
            # set elements are (index, sign) pairs: a position where the two
            # models disagree in sign contributes twice to the union
            union = int(sizes[i] + sizes[j]) - inter
            total += 1.0 if union == 0 else inter / union
            n_pairs += 1
    return total / n_pairs


def lowess_curve(predicted, y, fraction: float = 2.0 / 3.0):
    """Lowess-smoothed calibration curve.

    Locally weighted linear regression of y on the predictions with tricube
    weights over the nearest `fraction` of points (no robustness
    iterations), evaluated at the sorted unique predictions and clamped to
    [0, 1]. Returns an (m, 2) array of (predicted, smoothed) points.
    """
    p = np.asarray(predicted, dtype=float).ravel()
    yv = np.asarray(y, dtype=float).ravel()
    if p.size != yv.size:
        raise ValueError("predicted and y must have equal length")
    if p.size < 10:
        raise ValueError("need at least 10 points")
    if not (0.0 < fraction <= 1.0):
        raise ValueError("fraction must lie in (0, 1]")
    order = np.argsort(p, kind="stable")
    r = int(np.ceil(fraction * p.size))
    xu, fitted = _kernels.lowess_smooth(p[order], yv[order], r)
    return np.column_stack([xu, np.clip(fitted, 0.0, 1.0)])


def percentile_ci(values, level: float = 0.95):
    """Empirical percentile interval (linear interpolation between order
    statistics); the default level gives the 2.5th and 97.5th percentiles."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("empty input")
    v = v[np.isfinite(v)]
    if v.size < 2:
        raise ValueError("need at least 2 finite values")
    alpha = 100.0 * (1.0 - level) / 2.0
    lo, hi = np.percentile(v, [alpha, 100.0 - alpha], method="linear")
    return float(lo), float(hi)


@dataclass(frozen=True)
class ReplicationMetrics:
    """Metrics of one fitted model on one validation set."""

    rep: int
    method: str
    auroc: float
    citl: float
    cslope: float
    r2_nagelkerke: float
    coef_mse: float  # nan when no ground truth exists
    calibration_curve: np.ndarray = None


@dataclass
class MetricsReport:
    """Aggregated per-method results over replications."""

    method: str
    per_rep: list = field(default_factory=list)
    exjacc: float = float("nan")

    _FIELDS = ("auroc", "citl", "cslope", "r2_nagelkerke", "coef_mse")

    def values(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.per_rep], dtype=float)

    def summary(self) -> dict:
        out = {}
        for name in self._FIELDS:
            vals = self.values(name)
            finite = vals[np.isfinite(vals)]
            if finite.size == 0:
                continue
            entry = {"mean": float(finite.mean())}
            if finite.size >= 2:
                lo, hi = percentile_ci(finite)
                entry["ci_low"], entry["ci_high"] = lo, hi
            out[name] = entry
        if np.isfinite(self.exjacc):
            out["exjacc"] = {"mean": float(self.exjacc)}
        return out
