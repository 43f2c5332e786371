"""Gradient-based training: Adam with early stopping, projected variants,
and stochastic inverted-dropout training.

Two execution paths share identical semantics:

* :func:`minimize` / :func:`minimize_projected` run any
  ``obj(params) -> (value, grad)`` callable through a pure-Python Adam
  loop (used by the latent-model objectives and by tests).
* :func:`train_linear` dispatches the penalized-logistic family to the
  selected kernel backend (compiled when available), which fuses the
  whole epoch loop.

The monitored quantity for early stopping is the full training objective
(no inner validation split); the returned parameters are those of the best
recorded epoch, never the last one.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels, _purekernel
from .model_core import Dataset, LinearModel

__all__ = [
    "OptimizerConfig",
    "MinimizeResult",
    "NonFiniteLossError",
    "minimize",
    "minimize_projected",
    "minimize_dropout_stochastic",
    "train_linear",
]


@dataclass(frozen=True)
class OptimizerConfig:
    """Adam settings; defaults follow the training protocol used throughout.

    ``learning_rate`` is a constant step size. ``patience`` counts epochs
    without strict improvement of the recorded loss before stopping.
    """

    max_epochs: int = 1000
    patience: int = 500
    learning_rate: float = 0.1
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.max_epochs < 1 or self.patience < 1:
            raise ValueError("max_epochs and patience must be positive")
        if self.patience > self.max_epochs:
            raise ValueError("patience must not exceed max_epochs")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")

    def with_seed(self, seed: int) -> "OptimizerConfig":
        return replace(self, seed=int(seed))


@dataclass(frozen=True)
class MinimizeResult:
    params: np.ndarray
    trace: np.ndarray
    best_epoch: int

    @property
    def best_loss(self) -> float:
        return float(self.trace[self.best_epoch])

    @property
    def n_epochs(self) -> int:
        return int(self.trace.shape[0])


class NonFiniteLossError(RuntimeError):
    """Loss or gradient became non-finite during optimization."""

    def __init__(self, epoch: int, what: str = "loss"):
        super().__init__(f"non-finite {what} at epoch {epoch}")
        self.epoch = epoch


def minimize(objective, x0, config: OptimizerConfig, nonneg_idx=()) -> MinimizeResult:
    """Adam-minimize a ``params -> (value, grad)`` callable.

    Returns the parameters with the lowest recorded loss; stops early after
    ``config.patience`` epochs without improvement.
    """
    x = np.asarray(x0, dtype=float).copy()
    nonneg_idx = np.asarray(nonneg_idx, dtype=np.int64)
    if nonneg_idx.size:
        if nonneg_idx.min() < 0 or nonneg_idx.max() >= x.shape[0]:
            raise IndexError("nonneg index out of range")
        x[nonneg_idx] = np.maximum(x[nonneg_idx], 0.0)

    m = np.zeros_like(x)
    v = np.zeros_like(x)
    b1, b2, eps, lr = (config.adam_beta1, config.adam_beta2,
                       config.adam_eps, config.learning_rate)
    best_x = x.copy()
    best_loss = np.inf
    best_epoch = 0
    stall = 0
    trace = []

    for epoch in range(config.max_epochs):
        loss, grad = objective(x)
        loss = float(loss)
        if not np.isfinite(loss):
            raise NonFiniteLossError(epoch, "loss")
        trace.append(loss)
        if loss < best_loss:
            best_loss = loss
            best_x = x.copy()
            best_epoch = epoch
            stall = 0
        else:
            stall += 1
            if stall >= config.patience:
                break
        grad = np.asarray(grad, dtype=float)
        if not np.all(np.isfinite(grad)):
            raise NonFiniteLossError(epoch, "gradient")
        t = epoch + 1
        m = b1 * m + (1.0 - b1) * grad
        v = b2 * v + (1.0 - b2) * grad * grad
        x = x - lr * (m / (1.0 - b1 ** t)) / (np.sqrt(v / (1.0 - b2 ** t)) + eps)
        if nonneg_idx.size:
            x[nonneg_idx] = np.maximum(x[nonneg_idx], 0.0)

    return MinimizeResult(best_x, np.asarray(trace), best_epoch)


def minimize_projected(objective, x0, nonneg_idx, config: OptimizerConfig) -> MinimizeResult:
    """Like :func:`minimize`, clamping the indexed entries to >= 0 after
    every update, so the constraint holds exactly at every epoch boundary."""
    return minimize(objective, x0, config, nonneg_idx=nonneg_idx)


def _draw_masks(n_epochs: int, d: int, keep_prob: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return (rng.random((n_epochs, d)) < keep_prob).astype(np.uint8)


def train_linear(X, y, config: OptimizerConfig, w0=None, b0: float = 0.0,
                 l1: float = 0.0, l2: float = 0.0, dropout_delta: float = 0.0,
                 nonneg_idx=(), masks=None, mask_scale: float = 1.0,
                 on_epoch=None):
    """Train a (penalized) logistic model through the kernel backend.

    Returns (coefficients, intercept, trace, best_epoch). ``on_epoch``
    forces the instrumented NumPy path; it is called before every update
    with (epoch, mask, effective_coefficients, intercept).
    """
    X = np.ascontiguousarray(X, dtype=float)
    n, d = X.shape
    w0 = np.zeros(d) if w0 is None else np.asarray(w0, dtype=float)
    nonneg_idx = np.asarray(nonneg_idx, dtype=np.int64)
    if nonneg_idx.size and (nonneg_idx.min() < 0 or nonneg_idx.max() >= d):
        raise IndexError("nonneg index out of range")
    args = (X, np.asarray(y, dtype=float), w0, float(b0), float(l1), float(l2),
            float(dropout_delta), nonneg_idx, masks, float(mask_scale),
            config.learning_rate, config.adam_beta1, config.adam_beta2,
            config.adam_eps, config.max_epochs, config.patience)
    if on_epoch is not None:
        w, b, trace, best_epoch, err = _train_hooked(*args, on_epoch=on_epoch)
    else:
        w, b, trace, best_epoch, err = _kernels.train_linear(*args)
    if err >= 0:
        raise NonFiniteLossError(err)
    return w, b, trace, best_epoch


def _train_hooked(X, y, w0, b0, l1, l2, dropout_delta, nonneg_idx, masks,
                  mask_scale, lr, beta1, beta2, eps, max_epochs, patience,
                  on_epoch):
    """The pure-kernel loop with a per-epoch callback inserted.

    on_epoch receives (epoch, mask, coefficients, effective_coefficients,
    intercept) before the update; a parity test keeps this in sync with the
    kernels.
    """
    n, d = X.shape
    w = np.array(w0, dtype=float).copy()
    b = float(b0)
    use_masks = masks is not None
    drop_c = 0.5 * dropout_delta / (1.0 - dropout_delta) if dropout_delta > 0 else 0.0
    X2 = X * X if drop_c > 0 else None
    mw = np.zeros(d); vw = np.zeros(d); mb = 0.0; vb = 0.0
    best_w = w.copy(); best_b = b; best_loss = np.inf; best_epoch = 0
    stall = 0; trace = []
    full_mask = np.ones(d, dtype=np.uint8)
    for epoch in range(max_epochs):
        we = masks[epoch] * (mask_scale * w) if use_masks else w
        on_epoch(epoch, masks[epoch] if use_masks else full_mask,
                 w.copy(), we.copy(), b)
        p = _purekernel._sigmoid(X @ we + b)
        if use_masks:
            loss = _purekernel._nll(_purekernel._sigmoid(X @ w + b), y)
        else:
            loss = _purekernel._nll(p, y)
            if l1 > 0: loss += l1 * float(np.sum(np.abs(w)))
            if l2 > 0: loss += l2 * float(np.sum(w * w))
            if drop_c > 0:
                q = p * (1 - p); s_row = X2 @ (w * w)
                loss += drop_c * float(q @ s_row)
        if not np.isfinite(loss):
            return best_w, best_b, np.asarray(trace), best_epoch, epoch
        trace.append(loss)
        if loss < best_loss:
            best_loss, best_w, best_b, best_epoch, stall = loss, w.copy(), b, epoch, 0
        else:
            stall += 1
            if stall >= patience:
                break
        r = p - y
        gw = (X.T @ r) * (masks[epoch] * mask_scale) if use_masks else X.T @ r
        gb = float(np.sum(r))
        if not use_masks:
            if l1 > 0: gw = gw + l1 * np.sign(w)
            if l2 > 0: gw = gw + 2 * l2 * w
            if drop_c > 0:
                q = p * (1 - p); dq = q * (1 - 2 * p)
                gw = gw + drop_c * (2 * (X2.T @ q) * w + X.T @ (dq * s_row))
                gb += drop_c * float(dq @ s_row)
        if not (np.all(np.isfinite(gw)) and np.isfinite(gb)):
            return best_w, best_b, np.asarray(trace), best_epoch, epoch
        t = epoch + 1
        mw = beta1 * mw + (1 - beta1) * gw
        vw = beta2 * vw + (1 - beta2) * gw * gw
        w = w - lr * (mw / (1 - beta1 ** t)) / (np.sqrt(vw / (1 - beta2 ** t)) + eps)
        mb = beta1 * mb + (1 - beta1) * gb
        vb = beta2 * vb + (1 - beta2) * gb * gb
        b = b - lr * (mb / (1 - beta1 ** t)) / (np.sqrt(vb / (1 - beta2 ** t)) + eps)
        if len(nonneg_idx):
            w[nonneg_idx] = np.maximum(w[nonneg_idx], 0.0)
    return best_w, best_b, np.asarray(trace), best_epoch, -1


def minimize_dropout_stochastic(data: Dataset, delta: float,
                                config: OptimizerConfig, on_epoch=None) -> LinearModel:
    """Inverted-dropout training of a logistic model.

    Every epoch draws an independent keep-mask over the coefficients
    (keep probability 1 - delta) and scales kept coefficients by
    1/(1 - delta), so the returned model needs no rescaling. Early stopping
    monitors the full-model likelihood. Deterministic given config.seed.
    ``on_epoch(epoch, mask, coefficients, effective_coefficients,
    intercept)`` observes every training epoch.
    """
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    masks = _draw_masks(config.max_epochs, data.d, 1.0 - delta, config.seed)
    w, b, _, _ = train_linear(data.X, data.y, config, masks=masks,
                              mask_scale=1.0 / (1.0 - delta), on_epoch=on_epoch)
    return LinearModel(b, w, data.feature_names)
