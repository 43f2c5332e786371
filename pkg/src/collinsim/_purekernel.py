"""NumPy fallback for the hot kernels.

Implements the same contracts as the compiled module ``_fastcore``:

* ``train_linear`` -- one fused Adam loop over a penalized logistic
  objective (optional l1/l2 weights, analytic dropout penalty, per-epoch
  stochastic dropout masks, non-negativity projection), tracking the best
  recorded loss for early stopping.
* ``lowess_smooth`` -- tricube-weighted local linear smoother evaluated at
  the unique sorted abscissae.

Both are exercised against the compiled versions by the parity tests.
"""

import numpy as np

BACKEND_NAME = "python"

_CLAMP = 1e-12


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _nll(p, y):
    pc = np.clip(p, _CLAMP, 1.0 - _CLAMP)
    return -float(np.sum(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)))


def train_linear(X, y, w0, b0, l1, l2, dropout_delta, nonneg_idx, masks,
                 mask_scale, lr, beta1, beta2, eps, max_epochs, patience):
    """Run the Adam loop; returns (w, b, trace, best_epoch, err_epoch).

    err_epoch is -1 on success, else the epoch at which a non-finite loss
    or gradient appeared (the caller raises).
    """
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    w = np.array(w0, dtype=float).copy()
    b = float(b0)
    use_masks = masks is not None
    drop_c = 0.0
    if dropout_delta > 0.0:
        drop_c = 0.5 * dropout_delta / (1.0 - dropout_delta)
    X2 = X * X if drop_c > 0.0 else None

    mw = np.zeros(d)
    vw = np.zeros(d)
    mb = 0.0
    vb = 0.0
    best_w = w.copy()
    best_b = b
    best_loss = np.inf
    best_epoch = 0
    stall = 0
    trace = np.empty(max_epochs)
    n_done = 0

    for epoch in range(max_epochs):
        if use_masks:
            we = masks[epoch] * (mask_scale * w)
        else:
            we = w
        p = _sigmoid(X @ we + b)

        # recorded loss: full-model likelihood for stochastic dropout,
        # otherwise the complete objective at the current params
        if use_masks:
            loss = _nll(_sigmoid(X @ w + b), y)
        else:
            loss = _nll(p, y)
            if l1 > 0.0:
                loss += l1 * float(np.sum(np.abs(w)))
            if l2 > 0.0:
                loss += l2 * float(np.sum(w * w))
            if drop_c > 0.0:
                q = p * (1.0 - p)
                s_row = X2 @ (w * w)
                loss += drop_c * float(q @ s_row)
        if not np.isfinite(loss):
            return best_w, best_b, trace[:n_done], best_epoch, epoch
        trace[n_done] = loss
        n_done += 1

        if loss < best_loss:
            best_loss = loss
            best_w = w.copy()
            best_b = b
            best_epoch = epoch
            stall = 0
        else:
            stall += 1
            if stall >= patience:
                break

        r = p - y
        if use_masks:
            gw = (X.T @ r) * (masks[epoch] * mask_scale)
        else:
            gw = X.T @ r
        gb = float(np.sum(r))
        if not use_masks:
            if l1 > 0.0:
                gw += l1 * np.sign(w)
            if l2 > 0.0:
                gw += (2.0 * l2) * w
            if drop_c > 0.0:
                q = p * (1.0 - p)
                dq = q * (1.0 - 2.0 * p)
                gw += drop_c * (2.0 * (X2.T @ q) * w + X.T @ (dq * s_row))
                gb += drop_c * float(dq @ s_row)
        if not (np.all(np.isfinite(gw)) and np.isfinite(gb)):
            return best_w, best_b, trace[:n_done], best_epoch, epoch

        t = epoch + 1
        c1 = 1.0 - beta1 ** t
        c2 = 1.0 - beta2 ** t
        mw = beta1 * mw + (1.0 - beta1) * gw
        vw = beta2 * vw + (1.0 - beta2) * gw * gw
        w = w - lr * (mw / c1) / (np.sqrt(vw / c2) + eps)
        mb = beta1 * mb + (1.0 - beta1) * gb
        vb = beta2 * vb + (1.0 - beta2) * gb * gb
        b = b - lr * (mb / c1) / (np.sqrt(vb / c2) + eps)
        if len(nonneg_idx):
            w[nonneg_idx] = np.maximum(w[nonneg_idx], 0.0)

    return best_w, best_b, trace[:n_done].copy(), best_epoch, -1


def lowess_smooth(x_sorted, y_sorted, r):
    """Local linear fit with tricube weights over the r nearest neighbours.

    x_sorted must be ascending. Returns (unique x, fitted values).
    """
    x = np.asarray(x_sorted, dtype=float)
    y = np.asarray(y_sorted, dtype=float)
    n = x.shape[0]
    r = min(max(int(r), 2), n)
    xu, first = np.unique(x, return_index=True)
    m = xu.shape[0]

    # nearest-neighbour windows on a sorted array: two-pointer sweep
    lo_arr = np.empty(m, dtype=np.intp)
    lo = 0
    for i in range(m):
        x0 = xu[i]
        hi = lo + r
        while hi < n and (x[hi] - x0) < (x0 - x[lo]):
            lo += 1
            hi += 1
        lo_arr[i] = lo
    fitted = np.empty(m)

    block = max(1, int(2_000_000 // r))
    cols = np.arange(r)
    for start in range(0, m, block):
        stop = min(start + block, m)
        idx = lo_arr[start:stop, None] + cols[None, :]
        xw = x[idx]
        yw = y[idx]
        x0 = xu[start:stop, None]
        u = xw - x0
        h = np.maximum(-u[:, :1], u[:, -1:])
        zero_h = (h[:, 0] == 0.0)
        h_safe = np.where(h == 0.0, 1.0, h)
        a = np.abs(u) / h_safe
        wgt = np.where(a < 1.0, (1.0 - a ** 3) ** 3, 0.0)
        wgt[zero_h] = 1.0
        sw = wgt.sum(axis=1)
        swu = (wgt * u).sum(axis=1)
        swy = (wgt * yw).sum(axis=1)
        swuu = (wgt * u * u).sum(axis=1)
        swuy = (wgt * u * yw).sum(axis=1)
        den = sw * swuu - swu * swu
        mean_fit = swy / sw
        with np.errstate(divide="ignore", invalid="ignore"):
            lin_fit = (swy * swuu - swu * swuy) / den
        use_mean = (den <= 1e-12 * np.maximum(sw * swuu, 1e-300)) | zero_h
        fitted[start:stop] = np.where(use_mean, mean_fit, lin_fit)
    return xu, fitted
