"""Desk-scale computational ghost imaging: speckle synthesis, bucket-detector
simulation, correlation reconstruction, quality metrics, and a from-scratch
convolutional enhancer trained purely on simulated data."""

__version__ = "0.1.0"

from .speckle import (PatternSpec, PatternStack, generate, generate_pink,
                      generate_white, load_stack, neighbor_correlation,
                      radial_power_spectrum, spectral_slope)
from .datasets import (Dataset, Scene, load_mnist, make_block_digit,
                       read_idx_images, read_idx_labels, resize_to_scene,
                       write_idx)
from .forward import BucketSeries, NoiseSpec, add_noise, measure, measure_snr
from .recon import (BETA_TIERS, GroundTruth, ReconImage, beta_for,
                    ground_truth, load_recon, reconstruct)
from .metrics import QualityReport, cc, mse_normalized, psnr, score, vis
from .nn import (Network, NetworkArch, TrainConfig, load_checkpoint_file,
                 save_checkpoint_file, train)
from .pipeline import (METHOD_TIERS, RunConfig, SweepConfig,
                       build_training_corpus, enhance, evaluate,
                       figure_sweep, make_stack, simulate_recon)
