"""Network assembly: conv/BN/ReLU blocks feeding a dropout + dense head.

The production architecture is four 3x3 conv blocks with channel widths
(16, 32, 32, 16) on a 54 x 98 input, dropout 0.2, and a dense layer back to
54*98 outputs.  Input size, widths, and block count stay parameterizable so
small instances can drive gradient checks and fast tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import layers


@dataclass(frozen=True)
class NetworkArch:
    input_hw: tuple = (54, 98)
    channels: tuple = (16, 32, 32, 16)
    dropout: float = 0.2

    def __post_init__(self):
        if len(self.channels) < 1:
            raise ValueError("need at least one conv block")
        if any(c < 1 for c in self.channels):
            raise ValueError("channel widths must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout rate must be in [0, 1)")
        h, w = self.input_hw
        if h < 1 or w < 1:
            raise ValueError("input size must be positive")

    @property
    def n_blocks(self):
        return len(self.channels)

    @property
    def n_pixel(self):
        return self.input_hw[0] * self.input_hw[1]


class Network:
    """Holds parameters, batch-norm running statistics, optimizer momentum
    buffers, and the iteration counter."""

    def __init__(self, arch: NetworkArch, seed=0, dtype=np.float32, init=True):
        self.arch = arch
        self.dtype = np.dtype(dtype)
        self.iteration = 0
        self.params = {}
        self.state = {}
        rng = np.random.default_rng(seed)

        def he_normal(shape, fan_in):
            if not init:  # placeholder tensors, e.g. for checkpoint loading
                return np.zeros(shape, dtype=self.dtype)
            scale = np.sqrt(2.0 / fan_in)
            if self.dtype in (np.float32, np.float64):
                # draw in the target width; avoids a transient f64 copy of
                # the (possibly huge) dense weight matrix
                w = rng.standard_normal(shape, dtype=self.dtype)
                w *= self.dtype.type(scale)
                return w
            return (rng.standard_normal(shape) * scale).astype(self.dtype)

        c_prev = 1
        for k, c in enumerate(arch.channels):
            # He-style init for ReLU blocks; batch norm starts as identity.
            self.params[f"conv{k}_w"] = he_normal((c_prev, 3, 3, c), c_prev * 9)
            self.params[f"conv{k}_b"] = np.zeros(c, dtype=self.dtype)
            self.params[f"bn{k}_gamma"] = np.ones(c, dtype=self.dtype)
            self.params[f"bn{k}_beta"] = np.zeros(c, dtype=self.dtype)
            self.state[f"bn{k}_mean"] = np.zeros(c, dtype=self.dtype)
            self.state[f"bn{k}_var"] = np.ones(c, dtype=self.dtype)
            c_prev = c
        d_in = arch.n_pixel * c_prev
        self.params["fc_w"] = he_normal((d_in, arch.n_pixel), d_in)
        self.params["fc_b"] = np.zeros(arch.n_pixel, dtype=self.dtype)
        self.velocity = {k: np.zeros_like(v) for k, v in self.params.items()}

    def forward(self, x, mode="eval", dropout_rng=None):
        """x: (B, H, W) -> (out (B, H, W), cache).

        Train mode uses batch statistics (B >= 2 required) and seeded
        dropout masks; eval mode is deterministic.
        """
        if mode not in ("train", "eval"):
            raise ValueError(f"unknown mode {mode!r}")
        x = np.asarray(x, dtype=self.dtype)
        height, width = self.arch.input_hw
        if x.ndim != 3 or x.shape[1:] != (height, width):
            raise ValueError(f"expected (B, {height}, {width}) input, got {x.shape}")
        if mode == "train" and x.shape[0] < 2:
            raise ValueError("train mode needs batch size >= 2 for batch statistics")
        if mode == "train" and self.arch.dropout > 0 and dropout_rng is None:
            raise ValueError("train mode needs a dropout RNG")
        if not np.all(np.isfinite(x)):
            raise ValueError("network input contains non-finite values")

        batch = x.shape[0]
        act = x[..., None]
        caches = []
        for k in range(self.arch.n_blocks):
            act, conv_cache = layers.conv3x3_forward(
                act, self.params[f"conv{k}_w"], self.params[f"conv{k}_b"])
            act, bn_cache, new_mean, new_var = layers.batchnorm_forward(
                act, self.params[f"bn{k}_gamma"], self.params[f"bn{k}_beta"],
                self.state[f"bn{k}_mean"], self.state[f"bn{k}_var"], mode)
            if mode == "train":
                self.state[f"bn{k}_mean"] = new_mean.astype(self.dtype)
                self.state[f"bn{k}_var"] = new_var.astype(self.dtype)
            act, relu_cache = layers.relu_forward(act)
            caches.append((conv_cache, bn_cache, relu_cache))

        flat = act.reshape(batch, -1)
        flat, drop_cache = layers.dropout_forward(flat, self.arch.dropout,
                                                  dropout_rng, mode)
        out, fc_cache = layers.dense_forward(flat, self.params["fc_w"],
                                             self.params["fc_b"])
        cache = (caches, drop_cache, fc_cache, act.shape)
        return out.reshape(batch, height, width), cache

    def backward(self, dout, cache):
        """dout: (B, H, W) gradient of the loss w.r.t. the output.

        Returns a dict of parameter gradients keyed like ``params``.
        """
        if cache is None:
            raise ValueError("backward needs the cache from a train-mode forward")
        caches, drop_cache, fc_cache, act_shape = cache
        grads = {}
        dflat = dout.reshape(dout.shape[0], -1).astype(self.dtype)
        dflat, grads["fc_w"], grads["fc_b"] = layers.dense_backward(
            dflat, fc_cache, self.params["fc_w"])
        dflat = layers.dropout_backward(dflat, drop_cache)
        dact = dflat.reshape(act_shape)
        for k in range(self.arch.n_blocks - 1, -1, -1):
            conv_cache, bn_cache, relu_cache = caches[k]
            dact = layers.relu_backward(dact, relu_cache)
            dact, grads[f"bn{k}_gamma"], grads[f"bn{k}_beta"] = \
                layers.batchnorm_backward(dact, bn_cache)
            dact, grads[f"conv{k}_w"], grads[f"conv{k}_b"] = \
                layers.conv3x3_backward(dact, conv_cache, need_dx=k > 0)
        return grads

    def check_finite(self):
        for name, value in {**self.params, **self.state}.items():
            if not np.isfinite(np.sum(value, dtype=np.float64)):
                raise FloatingPointError(f"non-finite values in tensor {name!r}")
