"""The eight estimation methods behind one uniform interface.

Every method returns a :class:`LinearModel` on the (standardized) predictor
scale: plain logistic regression (LR), Lasso, Ridge, ElasticNet, the
closed-form Dropout objective, principal-component logistic regression
(PCLR), the jointly trained linear-autoencoder logistic regression (LAELR),
and non-negativity-constrained logistic regression for dose predictors
(LR_NN). :func:`hyperparameter_space` declares each method's tuning ranges
and priors.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .losses import PenaltySpec, laelr_objective, pack_laelr, reconstruction_objective, unpack_laelr
from .model_core import Dataset, LinearModel
from .optim import OptimizerConfig, minimize, minimize_dropout_stochastic, train_linear

__all__ = [
    "METHOD_NAMES",
    "MethodSpec",
    "ParamSpec",
    "fit",
    "fit_pclr",
    "fit_laelr",
    "hyperparameter_space",
    "pca_encoder",
]

METHOD_NAMES = ("LR", "Lasso", "Ridge", "ElasticNet", "Dropout", "PCLR", "LAELR", "LR_NN")

# hyperparameters each method requires at fit time
_REQUIRED = {
    "LR": (),
    "LR_NN": (),
    "Lasso": ("c_l1",),
    "Ridge": ("c_l2",),
    "ElasticNet": ("c_l1", "c_l2"),
    "Dropout": ("delta",),
    "PCLR": ("k",),
    "LAELR": ("k", "c_lae"),
}

# how far from zero a training-column mean may be before fit() refuses
STANDARDIZED_MEAN_TOL = 0.02


@dataclass(frozen=True)
class MethodSpec:
    """A method plus its hyperparameters.

    Unset hyperparameters (None) make the spec a *template*, accepted by the
    tuner but rejected by :func:`fit`. ``stochastic_dropout`` switches the
    Dropout method from the closed-form penalty to inverted-dropout
    training with per-epoch masks.
    """

    method: str
    c_l1: float = None
    c_l2: float = None
    delta: float = None
    k: int = None
    c_lae: float = None
    stochastic_dropout: bool = False

    def __post_init__(self):
        if self.method not in METHOD_NAMES:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHOD_NAMES}")
        if self.method in ("LR", "LR_NN"):
            if any(v is not None for v in (self.c_l1, self.c_l2, self.delta, self.k, self.c_lae)):
                raise ValueError(f"{self.method} carries no hyperparameters")

    def with_params(self, **params) -> "MethodSpec":
        unknown = set(params) - {"c_l1", "c_l2", "delta", "k", "c_lae"}
        if unknown:
            raise ValueError(f"unknown hyperparameters {sorted(unknown)}")
        if "k" in params:
            params["k"] = int(round(params["k"]))
        return replace(self, **params)

    def require_complete(self):
        missing = [p for p in _REQUIRED[self.method] if getattr(self, p) is None]
        if missing:
            raise ValueError(f"{self.method} needs hyperparameters {missing}")


@dataclass(frozen=True)
class ParamSpec:
    """One tunable hyperparameter: range, prior shape, integrality."""

    name: str
    low: float
    high: float
    prior: str  # "linear" or "log"
    integer: bool = False


def hyperparameter_space(method: str, d: int):
    """Tuning ranges and priors per method; empty for LR and LR_NN.

    Component counts use integers in [min(4, d), d].
    """
    if method not in METHOD_NAMES:
        raise ValueError(f"unknown method {method!r}")
    shrink = dict(low=1e-3, high=1e2, prior="log")
    k_spec = ParamSpec("k", min(4, d), d, "linear", integer=True)
    return {
        "LR": [],
        "LR_NN": [],
        "Lasso": [ParamSpec("c_l1", **shrink)],
        "Ridge": [ParamSpec("c_l2", **shrink)],
        "ElasticNet": [ParamSpec("c_l1", **shrink), ParamSpec("c_l2", **shrink)],
        "Dropout": [ParamSpec("delta", 0.1, 0.5, "linear")],
        "PCLR": [k_spec],
        "LAELR": [k_spec, ParamSpec("c_lae", **shrink)],
    }[method]


def _check_standardized(data: Dataset):
    means = data.X.mean(axis=0)
    worst = float(np.max(np.abs(means))) if data.d else 0.0
    if worst > STANDARDIZED_MEAN_TOL:
        raise ValueError(
            f"fit expects standardized predictors; a column mean is {worst:.3f} "
            f"(limit {STANDARDIZED_MEAN_TOL})"
        )


def fit(spec: MethodSpec, data: Dataset, config: OptimizerConfig) -> LinearModel:
    """Fit one method on standardized data and return its linear model."""
    spec.require_complete()
    _check_standardized(data)
    method = spec.method

    if method == "PCLR":
        return fit_pclr(spec.k, data, config)
    if method == "LAELR":
        return fit_laelr(spec.k, spec.c_lae, data, config)
    if method == "Dropout" and spec.stochastic_dropout:
        return minimize_dropout_stochastic(data, spec.delta, config)

    l1 = l2 = delta = 0.0
    nonneg = ()
    if method == "Lasso":
        PenaltySpec("l1", c_l1=spec.c_l1)  # validates positivity
        l1 = 1.0 / spec.c_l1
    elif method == "Ridge":
        PenaltySpec("l2", c_l2=spec.c_l2)
        l2 = 1.0 / spec.c_l2
    elif method == "ElasticNet":
        PenaltySpec("elastic_net", c_l1=spec.c_l1, c_l2=spec.c_l2)
        l1, l2 = 1.0 / spec.c_l1, 1.0 / spec.c_l2
    elif method == "Dropout":
        PenaltySpec("dropout_analytic", delta=spec.delta)
        delta = spec.delta
    elif method == "LR_NN":
        nonneg = np.flatnonzero(data.dose_mask)

    w, b, _, _ = train_linear(data.X, data.y, config, l1=l1, l2=l2,
                              dropout_delta=delta, nonneg_idx=nonneg)
    return LinearModel(b, w, data.feature_names)


def _pca_directions(X, k: int):
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if not (1 <= k <= d):
        raise ValueError(f"k must lie in [1, {d}]")
    Xc = X - X.mean(axis=0)
    cov = (Xc.T @ Xc) / n
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:k]
    W = eigvecs[:, order].T.copy()
    for row in W:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    return W, eigvals[order]


def pca_encoder(X, k: int) -> np.ndarray:
    """Top-k principal directions of X as rows of a k x d matrix.

    Eigendecomposition of the sample covariance, components ordered by
    decreasing eigenvalue, each eigenvector's largest-magnitude entry made
    positive so the result is deterministic.
    """
    return _pca_directions(X, k)[0]


def _gradient_pca_encoder(X, k: int, config: OptimizerConfig) -> np.ndarray:
    """Gradient-descent route to the principal subspace (fidelity path):
    minimize the tied-weights reconstruction loss, then orthonormalize."""
    d = X.shape[1]
    rng = np.random.default_rng(config.seed)
    W0 = 0.01 * rng.standard_normal((k, d))
    res = minimize(reconstruction_objective(X, k), W0.ravel(), config)
    W = res.params.reshape(k, d)
    _, _, Vt = np.linalg.svd(W, full_matrices=False)
    return Vt


def fit_pclr(k: int, data: Dataset, config: OptimizerConfig,
             use_gradient_pca: bool = False) -> LinearModel:
    """Principal-component logistic regression, rewritten to predictor space.

    Projects onto the top-k principal directions W, fits a logistic head on
    the scores H = X W^T, and returns beta = W^T gamma, beta0 = gamma0, so
    that predictions from the returned model equal the project-then-predict
    pipeline exactly.
    """
    if use_gradient_pca:
        W = _gradient_pca_encoder(data.X, k, config)
        eigvals = None
    else:
        W, eigvals = _pca_directions(data.X, k)
    H = data.X @ W.T
    if eigvals is not None:
        # numerically-null directions carry no variance; their scores are
        # representation noise, so pin them to the exact zero they stand for
        null = eigvals <= 1e-12 * max(float(eigvals[0]), 1e-300)
        H[:, null] = 0.0
    gamma, gamma0, _, _ = train_linear(H, data.y, config)
    return LinearModel(gamma0, W.T @ gamma, data.feature_names)


def fit_laelr(k: int, c_lae: float, data: Dataset, config: OptimizerConfig,
              return_latent: bool = False):
    """Linear-autoencoder logistic regression.

    Jointly optimizes encoder W, decoder V and the logistic head on the
    combined likelihood + reconstruction/c_lae loss, starting from the PCA
    solution (W from PCA, V = W^T, zero head). With ``return_latent`` the
    trained :class:`LatentSpec` is returned alongside the rewritten model.
    """
    W0 = pca_encoder(data.X, k)
    x0 = pack_laelr(W0, W0.T, np.zeros(k), 0.0)
    res = minimize(laelr_objective(data.X, data.y, k, c_lae), x0, config)
    W, V, gamma, gamma0 = unpack_laelr(res.params, k, data.d)
    model = LinearModel(gamma0, W.T @ gamma, data.feature_names)
    if return_latent:
        from .losses import LatentSpec
        return model, LatentSpec(k, c_lae, W, V, gamma, gamma0)
    return model
