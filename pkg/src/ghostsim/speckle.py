"""Seeded white- and pink-noise speckle pattern synthesis.

White patterns are i.i.d. uniform fields.  Pink patterns are produced by
amplitude-shaping a white field in the spatial frequency domain: each Fourier
amplitude at radial frequency f (cycles/image) is multiplied by f**-0.5, so
the power spectral density falls as 1/f while the phases stay untouched.
The DC term keeps multiplier 1.

Patterns are deterministic functions of their spec: pattern ``i`` of a stack
draws from an RNG seeded with ``seed ^ i``, so any single pattern can be
regenerated without the rest of the stack.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .containers import (KIND_PATTERN_STACK, read_container, write_container,
                         write_pgm)

FAMILIES = ("white", "pink")


@dataclass(frozen=True)
class PatternSpec:
    """Recipe for one reproducible stack of illumination patterns.

    The production geometry is 54 x 98 (one DMD macro-pixel per entry), but
    any positive size is accepted.
    """

    height: int = 54
    width: int = 98
    count: int = 1
    family: str = "white"
    seed: int = 0
    binarize: bool = True

    def __post_init__(self):
        if self.height <= 0 or self.width <= 0:
            raise ValueError(f"pattern dimensions must be positive, got {self.height}x{self.width}")
        if self.count < 1:
            raise ValueError(f"pattern count must be >= 1, got {self.count}")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown pattern family {self.family!r}, expected one of {FAMILIES}")

    @property
    def n_pixel(self):
        return self.height * self.width


@dataclass
class PatternStack:
    """A realized stack: (count, height, width) float32 values in [0, 1]."""

    spec: PatternSpec
    patterns: np.ndarray

    def __post_init__(self):
        expected = (self.spec.count, self.spec.height, self.spec.width)
        if self.patterns.shape != expected:
            raise ValueError(f"pattern array shape {self.patterns.shape} != spec shape {expected}")

    @property
    def count(self):
        return self.spec.count

    def save(self, path):
        write_container(path, self.patterns, kind=KIND_PATTERN_STACK,
                        family=self.spec.family, seed=self.spec.seed,
                        binarize=self.spec.binarize)

    def export_pgm(self, path, index=0):
        write_pgm(path, self.patterns[index])


def load_stack(path):
    images, meta = read_container(path)
    spec = PatternSpec(height=images.shape[1], width=images.shape[2],
                       count=images.shape[0], family=meta["family"],
                       seed=meta["seed"], binarize=meta["binarize"])
    return PatternStack(spec=spec, patterns=images)


def _pattern_rng(seed, index):
    # Counter-based derivation: pattern i is reproducible in isolation.
    return np.random.default_rng((int(seed) ^ int(index)) & 0xFFFFFFFFFFFFFFFF)


def _binarize_median(field):
    """Threshold at the median; ties go to 1 so binary patterns keep a
    50% duty cycle up to tie inflation."""
    return (field >= np.median(field)).astype(np.float32)


def _pink_filter(height, width):
    fy = np.fft.fftfreq(height) * height   # cycles/image, vertical
    fx = np.fft.fftfreq(width) * width     # cycles/image, horizontal
    radius = np.sqrt(fy[:, None] ** 2 + fx[None, :] ** 2)
    shaping = np.ones_like(radius)
    nonzero = radius > 0
    shaping[nonzero] = radius[nonzero] ** -0.5
    return shaping


def _synthesize(spec: PatternSpec) -> PatternStack:
    patterns = np.empty((spec.count, spec.height, spec.width), dtype=np.float32)
    shaping = _pink_filter(spec.height, spec.width) if spec.family == "pink" else None
    for i in range(spec.count):
        rng = _pattern_rng(spec.seed, i)
        field = rng.uniform(0.0, 1.0, size=(spec.height, spec.width))
        if shaping is not None:
            spectrum = np.fft.fft2(field) * shaping
            field = np.fft.ifft2(spectrum).real
            lo, hi = field.min(), field.max()
            field = (field - lo) / (hi - lo)
        if spec.binarize:
            field = _binarize_median(field)
        patterns[i] = field
    return PatternStack(spec=spec, patterns=patterns)


def generate_white(spec: PatternSpec) -> PatternStack:
    """Stack of i.i.d. uniform [0, 1] patterns (optionally median-binarized)."""
    if spec.family != "white":
        raise ValueError(f"generate_white called with family {spec.family!r}")
    return _synthesize(spec)


def generate_pink(spec: PatternSpec) -> PatternStack:
    """Stack of 1/f-power patterns with positive neighbor correlations."""
    if spec.family != "pink":
        raise ValueError(f"generate_pink called with family {spec.family!r}")
    return _synthesize(spec)


def generate(spec: PatternSpec) -> PatternStack:
    """Dispatch on spec.family."""
    return generate_pink(spec) if spec.family == "pink" else generate_white(spec)


def radial_power_spectrum(stack: PatternStack):
    """Radially averaged periodogram of a stack.

    Each pattern is demeaned (constant detrend, as in a standard periodogram)
    before its 2-D FFT, so the zero-frequency bin is exactly zero.  Power is
    averaged over patterns first, then over annular bins whose radius is the
    radial frequency in cycles/image rounded to the nearest integer.

    Returns (frequencies, mean_power), frequencies ascending from 0.
    """
    if stack.count < 1:
        raise ValueError("radial_power_spectrum needs a non-empty stack")
    fields = stack.patterns.astype(np.float64)
    fields = fields - fields.mean(axis=(1, 2), keepdims=True)
    power = np.abs(np.fft.fft2(fields, axes=(1, 2))) ** 2
    mean_power = power.mean(axis=0)

    height, width = stack.spec.height, stack.spec.width
    fy = np.fft.fftfreq(height) * height
    fx = np.fft.fftfreq(width) * width
    radius = np.sqrt(fy[:, None] ** 2 + fx[None, :] ** 2)
    bins = np.rint(radius).astype(np.int64)

    n_bins = int(bins.max()) + 1
    sums = np.bincount(bins.ravel(), weights=mean_power.ravel(), minlength=n_bins)
    counts = np.bincount(bins.ravel(), minlength=n_bins)
    frequencies = np.arange(n_bins, dtype=np.float64)
    return frequencies, sums / counts


def spectral_slope(frequencies, power, band=None, shape=None):
    """Log-log regression slope of the radial spectrum over the mid band.

    The mid band defaults to [3, min(height, width)/4] cycles/image, which
    avoids the DC end and the aliased corner band.  ``shape`` supplies
    (height, width) when the default band is wanted.
    """
    if band is None:
        if shape is None:
            raise ValueError("either band or shape is required")
        band = (3.0, min(shape) / 4.0)
    lo, hi = band
    sel = (frequencies >= lo) & (frequencies <= hi) & (power > 0)
    if sel.sum() < 2:
        raise ValueError(f"band {band} selects fewer than two spectrum bins")
    slope, _ = np.polyfit(np.log10(frequencies[sel]), np.log10(power[sel]), 1)
    return float(slope)


def neighbor_correlation(stack: PatternStack) -> float:
    """Pearson correlation between horizontally adjacent pixels, pooled over
    every pattern in the stack."""
    left = stack.patterns[:, :, :-1].astype(np.float64).ravel()
    right = stack.patterns[:, :, 1:].astype(np.float64).ravel()
    return float(np.corrcoef(left, right)[0, 1])
