"""Single-pixel (bucket) detector simulation.

A bucket value is the total light through the object for one pattern:
``value_i = sum_xy pattern_i(x, y) * transmission(x, y)``.  Environmental
noise is additive, non-negative, and uniform, calibrated so that the mean
signal / mean noise ratio matches a requested SNR in dB:

    SNR = 10 * log10(P_s / P_b)

with P_s the mean of the clean series and P_b the noise mean.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .datasets import Scene
from .speckle import PatternStack


@dataclass
class BucketSeries:
    """Per-pattern scalar detector values."""

    values: np.ndarray
    snr_db: float | None = None
    pattern_ref: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ValueError("bucket series must be 1-D")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("bucket series contains non-finite values")

    def __len__(self):
        return len(self.values)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "value"])
            for i, v in enumerate(self.values):
                writer.writerow([i, repr(float(v))])


@dataclass(frozen=True)
class NoiseSpec:
    """SNR target in decibels plus the seed for the noise draw.

    ``snr_db=None`` (or +inf) disables noise injection entirely.
    """

    snr_db: float | None
    seed: int = 0

    def __post_init__(self):
        if self.snr_db is not None and math.isnan(self.snr_db):
            raise ValueError("snr_db must be finite or None")


def measure(scene: Scene, stack: PatternStack) -> BucketSeries:
    """Noiseless bucket series of a scene under every pattern in the stack."""
    if scene.shape != (stack.spec.height, stack.spec.width):
        raise ValueError(
            f"scene shape {scene.shape} does not match pattern shape "
            f"{(stack.spec.height, stack.spec.width)}")
    flat = stack.patterns.reshape(stack.count, -1)
    # f32 gemv avoids casting the whole stack; sums of binary patterns over
    # binary scenes stay exact (integers far below 2**24)
    values = flat @ scene.transmission.reshape(-1).astype(np.float32)
    ref = f"{stack.spec.family}-seed{stack.spec.seed}-n{stack.count}"
    return BucketSeries(values=values.astype(np.float64), pattern_ref=ref)


def add_noise(series: BucketSeries, noise: NoiseSpec) -> BucketSeries:
    """Add i.i.d. uniform non-negative noise with mean P_b chosen so that
    10*log10(mean(values)/P_b) equals the requested SNR."""
    if series.snr_db is not None:
        raise ValueError("series already carries noise")
    if noise.snr_db is None or noise.snr_db == math.inf:
        return BucketSeries(values=series.values.copy(), snr_db=None,
                            pattern_ref=series.pattern_ref)
    signal_mean = float(series.values.mean())
    if signal_mean <= 0:
        raise ValueError("cannot calibrate noise against a zero-mean signal")
    noise_mean = signal_mean / 10.0 ** (noise.snr_db / 10.0)
    rng = np.random.default_rng(noise.seed)
    background = rng.uniform(0.0, 2.0 * noise_mean, size=len(series))
    return BucketSeries(values=series.values + background, snr_db=noise.snr_db,
                        pattern_ref=series.pattern_ref)


def measure_snr(signal: BucketSeries, noise_component: BucketSeries) -> float:
    """Realized SNR in dB between a clean series and a noise series."""
    if len(signal) != len(noise_component):
        raise ValueError("series lengths differ")
    noise_mean = float(noise_component.values.mean())
    if noise_mean <= 0:
        raise ValueError("noise mean must be positive")
    return 10.0 * math.log10(float(signal.values.mean()) / noise_mean)
