"""SGD with momentum and the step-decay learning-rate schedule.

The update applied to every parameter tensor is

    theta_{l+1} = theta_l - alpha * grad + gamma * (theta_l - theta_{l-1})

where the momentum buffer tracks the previously applied step
(theta_l - theta_{l-1}) and gamma weighs its contribution.  The learning
rate is a step function of the epoch: ``lr_initial`` before ``decay_epoch``
and ``lr_after_decay`` at and after it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TrainConfig:
    lr_initial: float = 1e-3
    lr_after_decay: float = 1e-4
    decay_epoch: int = 75
    max_epochs: int = 100
    momentum: float = 0.9
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.lr_initial <= 0 or self.lr_after_decay <= 0:
            raise ValueError("learning rates must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if not 0 < self.decay_epoch < self.max_epochs:
            raise ValueError("decay epoch must fall inside the training run")
        if self.batch_size < 2:
            raise ValueError("batch size must be >= 2 (batch-norm statistics)")


def lr_for_epoch(epoch, config: TrainConfig) -> float:
    return config.lr_initial if epoch < config.decay_epoch else config.lr_after_decay


def _all_finite(arr):
    # One reduction pass instead of an isfinite boolean temporary: any NaN or
    # Inf in the input makes the sum non-finite (Inf - Inf yields NaN).
    return np.isfinite(np.sum(arr, dtype=np.float64 if arr.dtype.kind == "f"
                              and arr.itemsize >= 8 else np.float32))


def sgdm_step(net, grads, config: TrainConfig, epoch=0):
    """Apply one momentum update in place; returns the network.

    Aborts with diagnostics if any gradient is non-finite.  The momentum
    buffer is updated in place to the applied step, so no full-size
    temporaries are allocated.
    """
    alpha = lr_for_epoch(epoch, config)
    for name, param in net.params.items():
        grad = grads[name]
        if grad.shape != param.shape:
            raise ValueError(f"gradient shape {grad.shape} != parameter shape "
                             f"{param.shape} for {name!r}")
        if not _all_finite(grad):
            raise FloatingPointError(
                f"non-finite gradient for {name!r} at iteration {net.iteration}")
        velocity = net.velocity[name]
        velocity *= param.dtype.type(config.momentum)
        velocity -= param.dtype.type(alpha) * grad
        param += velocity
    net.iteration += 1
    return net
