"""Jitted versions of the hot kernels. Imported only when numba is active."""

import numpy as np
from numba import njit


@njit(cache=True)
def softmax_rows(x):
    rows, cols = x.shape
    out = np.empty_like(x)
    for i in range(rows):
        m = x[i, 0]
        for j in range(1, cols):
            if x[i, j] > m:
                m = x[i, j]
        s = 0.0
        for j in range(cols):
            e = np.exp(x[i, j] - m)
            out[i, j] = e
            s += e
        inv = 1.0 / s
        for j in range(cols):
            out[i, j] *= inv
    return out


@njit(cache=True)
def softmax_rows_vjp(y, gy):
    rows, cols = y.shape
    gx = np.empty_like(y)
    for i in range(rows):
        dot = 0.0
        for j in range(cols):
            dot += y[i, j] * gy[i, j]
        for j in range(cols):
            gx[i, j] = y[i, j] * (gy[i, j] - dot)
    return gx


@njit(cache=True)
def layernorm_rows(x, gain, bias, eps):
    rows, cols = x.shape
    y = np.empty_like(x)
    xhat = np.empty_like(x)
    inv_std = np.empty(rows)
    for i in range(rows):
        mu = 0.0
        for j in range(cols):
            mu += x[i, j]
        mu /= cols
        var = 0.0
        for j in range(cols):
            d = x[i, j] - mu
            var += d * d
        var /= cols
        inv = 1.0 / np.sqrt(var + eps)
        inv_std[i] = inv
        for j in range(cols):
            xh = (x[i, j] - mu) * inv
            xhat[i, j] = xh
            y[i, j] = gain[j] * xh + bias[j]
    return y, xhat, inv_std


@njit(cache=True)
def layernorm_rows_vjp(gy, xhat, inv_std, gain):
    rows, cols = gy.shape
    gx = np.empty_like(gy)
    ggain = np.zeros(cols)
    gbias = np.zeros(cols)
    for i in range(rows):
        m1 = 0.0
        m2 = 0.0
        for j in range(cols):
            gh = gy[i, j] * gain[j]
            m1 += gh
            m2 += gh * xhat[i, j]
            ggain[j] += gy[i, j] * xhat[i, j]
            gbias[j] += gy[i, j]
        m1 /= cols
        m2 /= cols
        for j in range(cols):
            gh = gy[i, j] * gain[j]
            gx[i, j] = inv_std[i] * (gh - m1 - xhat[i, j] * m2)
    return gx, ggain, gbias


@njit(cache=True)
def multipath_csi(gains, delays, aods, n_tx, n_sub):
    n_samples, n_paths = gains.shape
    out = np.zeros((n_samples, n_sub, n_tx), dtype=np.complex128)
    amp = np.sqrt(n_tx / n_paths)
    steer = np.empty(n_tx, dtype=np.complex128)
    for s in range(n_samples):
        for l in range(n_paths):
            sin_phi = np.sin(aods[s, l])
            for t in range(n_tx):
                steer[t] = np.exp(-1j * np.pi * t * sin_phi)
            coef = -2j * np.pi * delays[s, l] / n_sub
            for k in range(n_sub):
                ph = gains[s, l] * np.exp(coef * k)
                for t in range(n_tx):
                    out[s, k, t] += ph * steer[t]
    for s in range(n_samples):
        for k in range(n_sub):
            for t in range(n_tx):
                out[s, k, t] *= amp
    return out
