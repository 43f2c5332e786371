# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: fused Adam loop and lowess smoother.

Semantics mirror the NumPy fallback in ``_purekernel``; the parity tests
keep the two in lockstep.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log, sqrt, isfinite

cnp.import_array()

BACKEND_NAME = "compiled"

cdef double _CLAMP = 1e-12


cdef inline double _sig(double z) nogil:
    cdef double ez
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    ez = exp(z)
    return ez / (1.0 + ez)


cdef inline double _logterm(double p, double y) nogil:
    cdef double pc = p
    if pc < _CLAMP:
        pc = _CLAMP
    elif pc > 1.0 - _CLAMP:
        pc = 1.0 - _CLAMP
    return y * log(pc) + (1.0 - y) * log(1.0 - pc)


def train_linear(X, y, w0, double b0, double l1, double l2,
                 double dropout_delta, nonneg_idx, masks, double mask_scale,
                 double lr, double beta1, double beta2, double eps,
                 int max_epochs, int patience):
    cdef double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = Xv.shape[0], d = Xv.shape[1]

    w_arr = np.array(w0, dtype=np.float64).copy()
    cdef double[::1] w = w_arr
    cdef double b = b0

    cdef bint use_masks = masks is not None
    cdef cnp.uint8_t[:, ::1] mk
    if use_masks:
        mk = np.ascontiguousarray(masks, dtype=np.uint8)
    cdef long[::1] nn = np.ascontiguousarray(nonneg_idx, dtype=np.int64)
    cdef Py_ssize_t n_nn = nn.shape[0]

    cdef double drop_c = 0.0
    if dropout_delta > 0.0:
        drop_c = 0.5 * dropout_delta / (1.0 - dropout_delta)

    cdef double[::1] mw = np.zeros(d)
    cdef double[::1] vw = np.zeros(d)
    cdef double mb = 0.0, vb = 0.0
    best_w_arr = w_arr.copy()
    cdef double[::1] best_w = best_w_arr
    cdef double best_b = b
    cdef double best_loss = np.inf
    cdef int best_epoch = 0, stall = 0, n_done = 0, err_epoch = -1
    trace_arr = np.empty(max_epochs, dtype=np.float64)
    cdef double[::1] trace = trace_arr

    cdef double[::1] p = np.empty(n)
    cdef double[::1] gw = np.empty(d)
    cdef double[::1] s_row = np.empty(n)
    cdef double[::1] we = np.empty(d)

    cdef Py_ssize_t i, j, k
    cdef int epoch, t
    cdef double z, loss, r, gb, q, dq, acc, c1, c2, mhat, vhat, g, wj

    with nogil:
        for epoch in range(max_epochs):
            # effective coefficients for this epoch
            if use_masks:
                for j in range(d):
                    we[j] = mk[epoch, j] * (mask_scale * w[j])
            else:
                for j in range(d):
                    we[j] = w[j]

            loss = 0.0
            if use_masks:
                # predictions from the masked model, loss from the full one
                for i in range(n):
                    z = b
                    for j in range(d):
                        z += Xv[i, j] * we[j]
                    p[i] = _sig(z)
                    z = b
                    for j in range(d):
                        z += Xv[i, j] * w[j]
                    loss -= _logterm(_sig(z), yv[i])
            else:
                for i in range(n):
                    z = b
                    for j in range(d):
                        z += Xv[i, j] * w[j]
                    p[i] = _sig(z)
                    loss -= _logterm(p[i], yv[i])
                if l1 > 0.0:
                    for j in range(d):
                        loss += l1 * fabs(w[j])
                if l2 > 0.0:
                    for j in range(d):
                        loss += l2 * w[j] * w[j]
                if drop_c > 0.0:
                    for i in range(n):
                        acc = 0.0
                        for j in range(d):
                            acc += Xv[i, j] * Xv[i, j] * w[j] * w[j]
                        s_row[i] = acc
                        loss += drop_c * p[i] * (1.0 - p[i]) * acc
            if not isfinite(loss):
                err_epoch = epoch
                break
            trace[n_done] = loss
            n_done += 1

            if loss < best_loss:
                best_loss = loss
                for j in range(d):
                    best_w[j] = w[j]
                best_b = b
                best_epoch = epoch
                stall = 0
            else:
                stall += 1
                if stall >= patience:
                    break

            # gradient
            gb = 0.0
            for j in range(d):
                gw[j] = 0.0
            for i in range(n):
                r = p[i] - yv[i]
                gb += r
                for j in range(d):
                    gw[j] += Xv[i, j] * r
            if use_masks:
                for j in range(d):
                    gw[j] *= mk[epoch, j] * mask_scale
            else:
                if l1 > 0.0:
                    for j in range(d):
                        if w[j] > 0.0:
                            gw[j] += l1
                        elif w[j] < 0.0:
                            gw[j] -= l1
                if l2 > 0.0:
                    for j in range(d):
                        gw[j] += 2.0 * l2 * w[j]
                if drop_c > 0.0:
                    for i in range(n):
                        q = p[i] * (1.0 - p[i])
                        dq = q * (1.0 - 2.0 * p[i])
                        gb += drop_c * dq * s_row[i]
                        for j in range(d):
                            gw[j] += drop_c * (2.0 * q * Xv[i, j] * Xv[i, j] * w[j]
                                               + dq * Xv[i, j] * s_row[i])
            acc = gb
            for j in range(d):
                acc += gw[j]
            if not isfinite(acc):
                err_epoch = epoch
                break

            # Adam step
            t = epoch + 1
            c1 = 1.0 - beta1 ** t
            c2 = 1.0 - beta2 ** t
            for j in range(d):
                g = gw[j]
                mw[j] = beta1 * mw[j] + (1.0 - beta1) * g
                vw[j] = beta2 * vw[j] + (1.0 - beta2) * g * g
                w[j] = w[j] - lr * (mw[j] / c1) / (sqrt(vw[j] / c2) + eps)
            mb = beta1 * mb + (1.0 - beta1) * gb
            vb = beta2 * vb + (1.0 - beta2) * gb * gb
            b = b - lr * (mb / c1) / (sqrt(vb / c2) + eps)
            for k in range(n_nn):
                j = nn[k]
                if w[j] < 0.0:
                    w[j] = 0.0

    return best_w_arr, best_b, trace_arr[:n_done].copy(), best_epoch, err_epoch


def lowess_smooth(x_sorted, y_sorted, r):
    cdef double[::1] x = np.ascontiguousarray(x_sorted, dtype=np.float64)
    cdef double[::1] y = np.ascontiguousarray(y_sorted, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t rr = min(max(int(r), 2), n)

    xu_arr, _ = np.unique(np.asarray(x_sorted, dtype=np.float64), return_index=True)
    cdef double[::1] xu = xu_arr
    cdef Py_ssize_t m = xu.shape[0]
    fitted_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] fitted = fitted_arr

    cdef Py_ssize_t i, j, lo = 0, hi
    cdef double x0, h, u, a, wgt, sw, swu, swy, swuu, swuy, den

    with nogil:
        for i in range(m):
            x0 = xu[i]
            hi = lo + rr
            while hi < n and (x[hi] - x0) < (x0 - x[lo]):
                lo += 1
                hi += 1
            h = x0 - x[lo]
            if x[hi - 1] - x0 > h:
                h = x[hi - 1] - x0
            if h == 0.0:
                sw = 0.0
                swy = 0.0
                for j in range(lo, hi):
                    sw += 1.0
                    swy += y[j]
                fitted[i] = swy / sw
                continue
            sw = swu = swy = swuu = swuy = 0.0
            for j in range(lo, hi):
                u = x[j] - x0
                a = fabs(u) / h
                if a < 1.0:
                    wgt = (1.0 - a * a * a)
                    wgt = wgt * wgt * wgt
                else:
                    wgt = 0.0
                sw += wgt
                swu += wgt * u
                swy += wgt * y[j]
                swuu += wgt * u * u
                swuy += wgt * u * y[j]
            den = sw * swuu - swu * swu
            if den <= 1e-12 * (sw * swuu if sw * swuu > 1e-300 else 1e-300):
                fitted[i] = swy / sw
            else:
                fitted[i] = (swy * swuu - swu * swuy) / den
    return xu_arr, fitted_arr
