"""From-scratch convolutional denoiser: analytic forward/backward passes,
SGD-with-momentum training, and checkpoint persistence."""

from .network import Network, NetworkArch
from .optim import TrainConfig, lr_for_epoch, sgdm_step
from .training import iterations_per_epoch, loss_mse, prepare_pairs, train
from .checkpoint import (load_checkpoint, load_checkpoint_file,
                         save_checkpoint, save_checkpoint_file)

__all__ = [
    "Network", "NetworkArch", "TrainConfig", "lr_for_epoch", "sgdm_step",
    "iterations_per_epoch", "loss_mse", "prepare_pairs", "train",
    "load_checkpoint", "load_checkpoint_file", "save_checkpoint",
    "save_checkpoint_file",
]
