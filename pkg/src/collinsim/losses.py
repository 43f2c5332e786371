"""Objective functions and analytic gradients for every fitting method.

The building blocks are the negative log-likelihood, the coefficient
penalties (l1, l2, elastic net, and the closed-form dropout penalty for
logistic models), and the linear-autoencoder reconstruction loss. Each
objective is exposed as a callable ``obj(params) -> (value, grad)`` over a
flat parameter vector, which is what the optimizer consumes and what the
finite-difference tests check.

Losses are sums (not means) over observations. Probabilities inside logs
are clamped to [1e-12, 1 - 1e-12] so the value stays finite under
separation; gradients use the unclamped probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model_core import Dataset, LinearModel, predict_risk, sigmoid

__all__ = [
    "PenaltySpec",
    "LatentSpec",
    "nll",
    "penalty",
    "reconstruction_loss",
    "penalized_logistic_objective",
    "laelr_objective",
    "reconstruction_objective",
    "pack_laelr",
    "unpack_laelr",
]

PROB_CLAMP = 1e-12

_KINDS = ("none", "l1", "l2", "elastic_net", "dropout_analytic")


@dataclass(frozen=True)
class PenaltySpec:
    """Which coefficient penalty to add, and with what strength.

    c_l1 and c_l2 are *inverse* penalty importances (larger = weaker
    penalty); delta is the dropout ratio. Fields irrelevant to ``kind``
    are ignored but must be finite.
    """

    kind: str = "none"
    c_l1: float = 1.0
    c_l2: float = 1.0
    delta: float = 0.5

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown penalty kind {self.kind!r}")
        for name in ("c_l1", "c_l2", "delta"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.kind in ("l1", "elastic_net") and self.c_l1 <= 0:
            raise ValueError("c_l1 must be positive")
        if self.kind in ("l2", "elastic_net") and self.c_l2 <= 0:
            raise ValueError("c_l2 must be positive")
        if self.kind == "dropout_analytic" and not (0.0 < self.delta < 1.0):
            raise ValueError("delta must lie in (0, 1)")


@dataclass(frozen=True)
class LatentSpec:
    """Parameters of a k-dimensional linear latent model.

    encoder_W is k x d, decoder_V is d x k; latent_coeffs/latent_intercept
    are the logistic head on the latent scores H = X W^T.
    """

    k: int
    c_lae: float
    encoder_W: np.ndarray
    decoder_V: np.ndarray
    latent_coeffs: np.ndarray
    latent_intercept: float

    def __post_init__(self):
        W = np.asarray(self.encoder_W, dtype=float)
        V = np.asarray(self.decoder_V, dtype=float)
        g = np.asarray(self.latent_coeffs, dtype=float).ravel()
        if W.shape[0] != self.k or V.shape[1] != self.k or g.shape[0] != self.k:
            raise ValueError("latent dimension mismatch")
        if self.k > W.shape[1]:
            raise ValueError("k may not exceed the number of predictors")
        object.__setattr__(self, "encoder_W", W)
        object.__setattr__(self, "decoder_V", V)
        object.__setattr__(self, "latent_coeffs", g)

    def encoder_orthonormality_defect(self) -> float:
        """max |W W^T - I| entry; ~0 for a PCA encoder."""
        W = self.encoder_W
        return float(np.max(np.abs(W @ W.T - np.eye(self.k))))


def _clamped_log_terms(p, y):
    pc = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)


def nll(model: LinearModel, data: Dataset) -> float:
    """Cross-entropy -sum[y log f + (1-y) log(1-f)] of the model on the data."""
    p = predict_risk(model, data.X)
    return -float(np.sum(_clamped_log_terms(p, data.y)))


def _penalty_terms(spec: PenaltySpec, coefs, X, intercept):
    """Return the penalty value given coefficients (intercept never penalized)."""
    w = np.asarray(coefs, dtype=float)
    if spec.kind == "none":
        return 0.0
    if spec.kind == "l1":
        return float(np.sum(np.abs(w))) / spec.c_l1
    if spec.kind == "l2":
        return float(np.sum(w * w)) / spec.c_l2
    if spec.kind == "elastic_net":
        return float(np.sum(np.abs(w))) / spec.c_l1 + float(np.sum(w * w)) / spec.c_l2
    # dropout_analytic: 1/2 * delta/(1-delta) * sum_i sum_j f_i(1-f_i) x_ij^2 w_j^2
    p = sigmoid(X @ w + intercept)
    q = p * (1.0 - p)
    s_row = (X * X) @ (w * w)
    return 0.5 * spec.delta / (1.0 - spec.delta) * float(q @ s_row)


def penalty(spec: PenaltySpec, model: LinearModel, data: Dataset) -> float:
    """Penalty value for the model; the dropout form re-evaluates f_i from
    the current model, so it needs the data."""
    if model.d != data.d:
        raise ValueError(f"model has {model.d} coefficients, data has {data.d} columns")
    return _penalty_terms(spec, model.coefficients, data.X, model.intercept)


def reconstruction_loss(W, V, X) -> float:
    """Squared Frobenius norm of the autoencoder residual.

    Observations are rows of X; the encoder maps each row x to W x and the
    decoder back via V. The PCA loss is the specialization V = W^T.
    """
    W = np.asarray(W, dtype=float)
    V = np.asarray(V, dtype=float)
    X = np.asarray(X, dtype=float)
    k, d = W.shape
    if V.shape != (d, k) or X.shape[1] != d:
        raise ValueError(
            f"shape mismatch: W {W.shape}, V {V.shape}, X {X.shape}"
        )
    R = X - (X @ W.T) @ V.T
    return float(np.sum(R * R))


# ---------------------------------------------------------------------------
# objective callables over flat parameter vectors
# ---------------------------------------------------------------------------

def penalized_logistic_objective(X, y, spec: PenaltySpec = PenaltySpec()):
    """Objective over params [coefficients..., intercept].

    Value is nll + penalty; the gradient is analytic (l1 subgradient at 0
    taken as 0). The dropout penalty depends on the intercept through f_i,
    so its gradient carries an intercept component; the other penalties
    never touch the intercept.
    """
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    X2 = X * X

    def obj(params):
        params = np.asarray(params, dtype=float)
        w, b = params[:-1], params[-1]
        p = sigmoid(X @ w + b)
        value = -float(np.sum(_clamped_log_terms(p, y)))
        r = p - y
        gw = X.T @ r
        gb = float(np.sum(r))
        if spec.kind in ("l1", "elastic_net"):
            value += float(np.sum(np.abs(w))) / spec.c_l1
            gw = gw + np.sign(w) / spec.c_l1
        if spec.kind in ("l2", "elastic_net"):
            value += float(np.sum(w * w)) / spec.c_l2
            gw = gw + (2.0 / spec.c_l2) * w
        if spec.kind == "dropout_analytic":
            c = 0.5 * spec.delta / (1.0 - spec.delta)
            q = p * (1.0 - p)
            dq = q * (1.0 - 2.0 * p)
            s_row = X2 @ (w * w)
            value += c * float(q @ s_row)
            gw = gw + c * (2.0 * (X2.T @ q) * w + X.T @ (dq * s_row))
            gb += c * float(dq @ s_row)
        return value, np.concatenate([gw, [gb]])

    return obj


def pack_laelr(W, V, gamma, gamma0):
    return np.concatenate([np.ravel(W), np.ravel(V), np.ravel(gamma), [gamma0]])


def unpack_laelr(params, k, d):
    params = np.asarray(params, dtype=float)
    W = params[: k * d].reshape(k, d)
    V = params[k * d: 2 * k * d].reshape(d, k)
    gamma = params[2 * k * d: 2 * k * d + k]
    gamma0 = float(params[-1])
    return W, V, gamma, gamma0


def laelr_objective(X, y, k: int, c_lae: float):
    """Joint objective L_ML(gamma, gamma0 on H = X W^T) + reconstruction / c_lae.

    Params are [W (k*d), V (d*k), gamma (k), gamma0].
    """
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    d = X.shape[1]
    if not (1 <= k <= d):
        raise ValueError(f"k must lie in [1, {d}]")
    if c_lae <= 0:
        raise ValueError("c_lae must be positive")

    def obj(params):
        W, V, gamma, gamma0 = unpack_laelr(params, k, d)
        H = X @ W.T
        p = sigmoid(H @ gamma + gamma0)
        value = -float(np.sum(_clamped_log_terms(p, y)))
        r = p - y
        g_gamma = H.T @ r
        g_gamma0 = float(np.sum(r))
        g_W = np.outer(gamma, X.T @ r)

        R = X - H @ V.T
        value += float(np.sum(R * R)) / c_lae
        G = (-2.0 / c_lae) * (X.T @ R)      # d(recon)/dA for A = W^T V^T
        g_W += (G @ V).T
        g_V = G.T @ W.T
        return value, pack_laelr(g_W, g_V, g_gamma, g_gamma0)

    return obj


def reconstruction_objective(X, k: int):
    """Tied-weights reconstruction loss |X - X W^T W|^2 over params W.ravel().

    Gradient-descent route to the principal subspace, kept for fidelity
    checks against the eigendecomposition path.
    """
    X = np.ascontiguousarray(X, dtype=float)
    d = X.shape[1]

    def obj(params):
        W = np.asarray(params, dtype=float).reshape(k, d)
        R = X - (X @ W.T) @ W
        value = float(np.sum(R * R))
        G = -2.0 * (X.T @ R)                # dL/dA for A = W^T W
        g_W = W @ (G + G.T)                 # through both W factors
        return value, g_W.ravel()

    return obj
