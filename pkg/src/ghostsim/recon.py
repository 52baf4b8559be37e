"""Correlation-based CGI reconstruction and the two-level ground truth.

The reconstruction is the classic ensemble covariance between the pattern
value at each pixel and the bucket series:

    G(x, y) = (1/N) * sum_i [pattern_i(x, y) - <pattern(x, y)>] * [b_i - <b>]

which is algebraically <I*b> - <I><b> but numerically better behaved (a
constant bucket series gives an exactly zero image).

The ground truth X of a scene given an image G is the two-level image whose
object pixels all take the object-class mean of G and whose background
pixels take the background-class mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .containers import (KIND_NETWORK_OUTPUT, KIND_RAW_CGI, read_container,
                         write_container, write_pgm, normalize01)
from .datasets import Scene
from .speckle import PatternStack

_SOURCE_KINDS = {"raw_cgi": KIND_RAW_CGI, "dl_output": KIND_NETWORK_OUTPUT}
_KIND_SOURCES = {v: k for k, v in _SOURCE_KINDS.items()}

# Sampling-ratio tiers used throughout, realized as pattern counts on the
# 5292-pixel production geometry (nearest-integer rounding).
BETA_TIERS = {
    0.005: 26,
    0.008: 42,
    0.01: 53,
    0.05: 265,
    0.10: 529,
    0.50: 2646,
    1.00: 5292,
}


@dataclass
class ReconImage:
    """A reconstructed image G with its sampling ratio and provenance tag."""

    g: np.ndarray
    beta: float
    source: str = "raw_cgi"

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=np.float64)
        if self.g.ndim != 2:
            raise ValueError("reconstruction must be a 2-D image")
        if not np.all(np.isfinite(self.g)):
            raise ValueError("reconstruction contains non-finite values")
        if not 0 < self.beta < np.inf:
            raise ValueError(f"beta must be in (0, inf), got {self.beta}")
        if self.source not in _SOURCE_KINDS:
            raise ValueError(f"unknown source tag {self.source!r}")

    def save(self, path):
        write_container(path, self.g[None, :, :], kind=_SOURCE_KINDS[self.source],
                        beta=self.beta)

    def export_pgm(self, path):
        # Display normalization only; stored values stay raw.
        write_pgm(path, normalize01(self.g))


def load_recon(path):
    images, meta = read_container(path)
    if meta["kind"] not in _KIND_SOURCES:
        raise ValueError(f"{path} does not hold a reconstruction (kind {meta['kind']})")
    return ReconImage(g=images[0].astype(np.float64), beta=meta["beta"],
                      source=_KIND_SOURCES[meta["kind"]])


@dataclass
class GroundTruth:
    """Two-level target image built from class means over a scene."""

    x: np.ndarray
    mean_object: float
    mean_background: float

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)


def beta_for(count, height, width):
    """Sampling ratio: pattern count over pixel count."""
    if height <= 0 or width <= 0:
        raise ValueError("image dimensions must be positive")
    if count <= 0:
        raise ValueError("pattern count must be positive")
    return count / (height * width)


def reconstruct(stack: PatternStack, series, beta=None) -> ReconImage:
    """Covariance reconstruction of a bucket series against its stack.

    ``beta`` defaults to count / N_pixel of the stack; passing it explicitly
    supports stacks that were sliced from a larger one.
    """
    values = np.asarray(series.values if hasattr(series, "values") else series,
                        dtype=np.float64)
    if len(values) != stack.count:
        raise ValueError(f"series length {len(values)} != stack count {stack.count}")
    if stack.count < 2:
        raise ValueError("covariance reconstruction needs at least 2 patterns")
    centered_b = values - values.mean()
    flat = stack.patterns.reshape(stack.count, -1).astype(np.float64)
    centered_p = flat - flat.mean(axis=0)
    g = (centered_p.T @ centered_b) / stack.count
    g = g.reshape(stack.spec.height, stack.spec.width)
    if beta is None:
        beta = beta_for(stack.count, stack.spec.height, stack.spec.width)
    return ReconImage(g=g, beta=beta, source="raw_cgi")


def ground_truth(scene: Scene, g) -> GroundTruth:
    """Assemble the two-level ground truth of ``g`` for ``scene``."""
    image = np.asarray(g.g if isinstance(g, ReconImage) else g, dtype=np.float64)
    if image.shape != scene.shape:
        raise ValueError(f"image shape {image.shape} != scene shape {scene.shape}")
    mask = scene.transmission.astype(bool)
    mean_object = float(image[mask].mean())
    mean_background = float(image[~mask].mean())
    x = np.where(mask, mean_object, mean_background)
    return GroundTruth(x=x, mean_object=mean_object, mean_background=mean_background)
