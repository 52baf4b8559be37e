"""Layer primitives with analytic backward passes.

Activations are NHWC: (batch, height, width, channels).  Every forward
returns (out, cache) and the matching backward consumes (dout, cache).
Layers never own parameters; the network object does.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv3x3_forward(x, w, b):
    """3x3 convolution, stride 1, zero padding 1 (spatial size preserved).

    x: (B, H, W, C_in); w: (C_in, 3, 3, C_out); b: (C_out,)
    """
    batch, height, width, c_in = x.shape
    c_out = w.shape[-1]
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    windows = sliding_window_view(padded, (3, 3), axis=(1, 2))
    # windows: (B, H, W, C_in, 3, 3) -> rows of C_in*9 patch values
    cols = windows.reshape(batch * height * width, c_in * 9)
    out = cols @ w.reshape(c_in * 9, c_out) + b
    cache = (cols, w, x.shape)
    return out.reshape(batch, height, width, c_out), cache


def conv3x3_backward(dout, cache, need_dx=True):
    cols, w, x_shape = cache
    batch, height, width, c_in = x_shape
    c_out = w.shape[-1]
    dflat = dout.reshape(-1, c_out)
    dw = (cols.T @ dflat).reshape(w.shape)
    db = dflat.sum(axis=0)
    if not need_dx:  # the input layer has nothing upstream
        return None, dw, db
    dcols = (dflat @ w.reshape(c_in * 9, c_out).T)
    dcols = dcols.reshape(batch, height, width, c_in, 3, 3)
    dpad = np.zeros((batch, height + 2, width + 2, c_in), dtype=dout.dtype)
    for kh in range(3):
        for kw in range(3):
            dpad[:, kh:kh + height, kw:kw + width, :] += dcols[:, :, :, :, kh, kw]
    dx = dpad[:, 1:height + 1, 1:width + 1, :]
    return dx, dw, db


def batchnorm_forward(x, gamma, beta, running_mean, running_var, mode,
                      momentum=0.9, eps=1e-5):
    """Per-channel batch normalization over (batch, height, width).

    Train mode normalizes with batch statistics and returns updated running
    statistics; eval mode uses the running statistics and returns them
    unchanged.
    """
    if mode == "train":
        mu = x.mean(axis=(0, 1, 2))
        var = x.var(axis=(0, 1, 2))
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = (x - mu) * inv_std
        out = gamma * xhat + beta
        new_mean = momentum * running_mean + (1.0 - momentum) * mu
        new_var = momentum * running_var + (1.0 - momentum) * var
        cache = (xhat, gamma, inv_std)
        return out, cache, new_mean, new_var
    if mode == "eval":
        xhat = (x - running_mean) / np.sqrt(running_var + eps)
        return gamma * xhat + beta, None, running_mean, running_var
    raise ValueError(f"unknown batchnorm mode {mode!r}")


def batchnorm_backward(dout, cache):
    xhat, gamma, inv_std = cache
    m = dout.shape[0] * dout.shape[1] * dout.shape[2]
    dgamma = (dout * xhat).sum(axis=(0, 1, 2))
    dbeta = dout.sum(axis=(0, 1, 2))
    dx = (gamma * inv_std / m) * (m * dout - dbeta - xhat * dgamma)
    return dx, dgamma, dbeta


def relu_forward(x):
    out = np.maximum(x, 0)
    return out, (x > 0)


def relu_backward(dout, cache):
    return dout * cache


def dropout_forward(x, rate, rng, mode):
    """Inverted dropout: surviving activations are scaled by 1/(1-rate) so
    eval mode needs no rescaling."""
    if mode == "eval" or rate == 0.0:
        return x, None
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    return x * keep, keep


def dropout_backward(dout, cache):
    if cache is None:
        return dout
    return dout * cache


def dense_forward(x, w, b):
    """x: (B, D_in); w: (D_in, D_out); b: (D_out,)"""
    return x @ w + b, x


def dense_backward(dout, cache, w):
    x = cache
    dw = x.T @ dout
    db = dout.sum(axis=0)
    dx = dout @ w.T
    return dx, dw, db
