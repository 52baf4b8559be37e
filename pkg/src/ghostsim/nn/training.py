"""Training loop: normalized-MSE loss, seeded mini-batching, epoch schedule.

Training pairs are (reconstruction, ground truth).  Each reconstruction is
min-max scaled to [0, 1] before entering the network; its two-level target
and the loss normalizer <G_o> are mapped through the same affine transform,
which leaves the pair consistent because class means are affine-equivariant.
"""

from __future__ import annotations

import numpy as np

from .network import Network, NetworkArch
from .optim import TrainConfig, lr_for_epoch, sgdm_step


def loss_mse(g, x, mean_object):
    """Object-mean normalized MSE and its gradient w.r.t. g.

    For a batch, ``mean_object`` is one normalizer per sample and the loss
    averages over samples.
    """
    g = np.asarray(g, dtype=np.result_type(np.asarray(g).dtype, np.float32))
    x = np.asarray(x)
    if g.ndim == 3:
        # Batched: one normalizer per sample.
        norm = np.asarray(mean_object, dtype=g.dtype).reshape(-1, 1, 1)
        batch = g.shape[0]
        n_pixel = g.shape[1] * g.shape[2]
    else:
        norm = np.asarray(mean_object, dtype=g.dtype)
        batch = 1
        n_pixel = g.size
    if np.any(norm == 0):
        raise ValueError("loss normalizer <G_o> must be nonzero")
    diff = (g - x) / norm
    loss = float(np.sum(diff * diff) / (n_pixel * batch))
    grad = 2.0 * diff / (norm * n_pixel * batch)
    return loss, grad


def prepare_pairs(pairs, dtype=np.float32):
    """Stack (ReconImage, GroundTruth) pairs into training arrays.

    Returns (inputs, targets, normalizers): inputs are the min-max scaled
    reconstructions, targets the identically rescaled two-level images, and
    normalizers the rescaled object-class means.
    """
    if not pairs:
        raise ValueError("empty training set")
    inputs, targets, norms = [], [], []
    for recon, gt in pairs:
        g = np.asarray(recon.g if hasattr(recon, "g") else recon, dtype=np.float64)
        x = np.asarray(gt.x if hasattr(gt, "x") else gt, dtype=np.float64)
        lo, hi = g.min(), g.max()
        if hi == lo:
            raise ValueError("constant reconstruction cannot be normalized")
        scale = 1.0 / (hi - lo)
        mean_object = getattr(gt, "mean_object", None)
        if mean_object is None:
            raise ValueError("ground truth must carry its object-class mean")
        norm = (mean_object - lo) * scale
        if norm == 0:
            raise ValueError("object-class mean equals the image minimum; "
                             "normalizer would vanish")
        inputs.append((g - lo) * scale)
        targets.append((x - lo) * scale)
        norms.append(norm)
    return (np.asarray(inputs, dtype=dtype), np.asarray(targets, dtype=dtype),
            np.asarray(norms, dtype=dtype))


def iterations_per_epoch(n_pairs, batch_size):
    """Mini-batches per epoch under drop-last batching."""
    return n_pairs // batch_size


def make_batches(n_pairs, batch_size, rng):
    """Shuffled index batches, dropping the final partial batch."""
    order = rng.permutation(n_pairs)
    n_batches = iterations_per_epoch(n_pairs, batch_size)
    return [order[i * batch_size:(i + 1) * batch_size] for i in range(n_batches)]


def train(pairs, arch: NetworkArch, config: TrainConfig, net=None,
          log=None):
    """Train a network on (reconstruction, ground truth) pairs.

    Returns (network, history) where history is the per-epoch mean loss.
    With n pairs, batch size b, and e epochs the run performs exactly
    e * (n // b) optimizer iterations; a dataset smaller than one batch is a
    configuration error.
    """
    inputs, targets, norms = prepare_pairs(pairs)
    n_pairs = inputs.shape[0]
    if iterations_per_epoch(n_pairs, config.batch_size) == 0:
        raise ValueError(
            f"{n_pairs} pairs with batch size {config.batch_size} yields zero "
            f"iterations per epoch under drop-last batching")
    if inputs.shape[1:] != arch.input_hw:
        raise ValueError(f"pair geometry {inputs.shape[1:]} != arch input {arch.input_hw}")

    if net is None:
        net = Network(arch, seed=config.seed, dtype=np.float32)
    shuffle_rng = np.random.default_rng([config.seed, 0xA])
    dropout_rng = np.random.default_rng([config.seed, 0xB])

    history = []
    for epoch in range(config.max_epochs):
        epoch_losses = []
        for batch_idx in make_batches(n_pairs, config.batch_size, shuffle_rng):
            out, cache = net.forward(inputs[batch_idx], mode="train",
                                     dropout_rng=dropout_rng)
            loss, dout = loss_mse(out, targets[batch_idx], norms[batch_idx])
            if not np.isfinite(loss):
                raise FloatingPointError(f"non-finite loss at iteration {net.iteration}")
            grads = net.backward(dout, cache)
            sgdm_step(net, grads, config, epoch=epoch)
            epoch_losses.append(loss)
        history.append(float(np.mean(epoch_losses)))
        if log is not None:
            log(f"epoch {epoch + 1}/{config.max_epochs}  "
                f"lr {lr_for_epoch(epoch, config):g}  loss {history[-1]:.6f}")
    net.check_finite()
    return net, history
