"""Image-quality indicators: normalized MSE, PSNR, visibility, and Pearson CC.

The MSE here is the object-mean normalized form used by the training loss,

    MSE = (1/N_pixel) * sum_i ((G_i - X_i) / <G_o>)^2,

and PSNR is defined on top of it as 10*log10((2^k - 1)^2 / MSE) with k the
gray-level bit depth (8 by default).  Because of the normalization, PSNR
values are comparable within this toolkit but not with the conventional
unnormalized-PSNR literature.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .datasets import Scene


def mse_normalized(g, x, mean_object):
    """Object-mean normalized mean square error between G and X."""
    if mean_object == 0:
        raise ValueError("normalizer <G_o> must be nonzero")
    g = np.asarray(g, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    return float(np.mean(((g - x) / mean_object) ** 2))


def psnr(g, x, mean_object, k=8):
    """Peak signal-to-noise ratio in dB at bit depth ``k``.

    A perfect match (MSE = 0) returns math.inf as the sentinel value.
    """
    mse = mse_normalized(g, x, mean_object)
    peak = (2 ** k - 1) ** 2
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(peak / mse)


def vis(g, scene: Scene):
    """Visibility: normalized contrast between object and background means.

    Uses the scene's transmission map to partition pixels; lands in [-1, 1]
    whenever ``g`` is non-negative.
    """
    g = np.asarray(g, dtype=np.float64)
    if g.shape != scene.shape:
        raise ValueError(f"image shape {g.shape} != scene shape {scene.shape}")
    mask = scene.transmission.astype(bool)
    mean_object = g[mask].mean()
    mean_background = g[~mask].mean()
    denom = mean_object + mean_background
    if denom == 0:
        raise ValueError("degenerate visibility: class means sum to zero")
    return float((mean_object - mean_background) / denom)


def cc(g, x):
    """Pearson correlation coefficient between two images, over all pixels."""
    g = np.asarray(g, dtype=np.float64).ravel()
    x = np.asarray(x, dtype=np.float64).ravel()
    if g.shape != x.shape:
        raise ValueError("images must share a shape")
    dg = g - g.mean()
    dx = x - x.mean()
    var_g = np.mean(dg ** 2)
    var_x = np.mean(dx ** 2)
    if var_g == 0 or var_x == 0:
        raise ValueError("correlation undefined for a zero-variance image")
    return float(np.mean(dg * dx) / math.sqrt(var_g * var_x))


@dataclass
class QualityReport:
    """One row of the evaluation table."""

    method: str
    beta: float
    snr_db: float | None
    digit: int
    style: str
    psnr: float
    vis: float
    cc: float
    mse: float
    k: int = 8

    CSV_FIELDS = ("method", "beta", "snr_db", "style", "digit",
                  "psnr", "vis", "cc", "mse")

    def csv_row(self):
        def fmt(v):
            if v is None:
                return "none"
            if isinstance(v, float):
                return f"{v:.9g}"
            return str(v)
        return [fmt(getattr(self, f)) for f in self.CSV_FIELDS]


def score(g, scene: Scene, *, method, beta, snr_db, k=8) -> QualityReport:
    """Full report for one image against its scene.

    The ground truth X is assembled from the image's own class means, so the
    caller decides the normalization convention of ``g`` (the pipeline feeds
    min-max normalized images, matching an 8-bit display convention).
    """
    from .recon import ground_truth  # local import to avoid a module cycle

    gt = ground_truth(scene, np.asarray(g, dtype=np.float64))
    return QualityReport(
        method=method, beta=beta, snr_db=snr_db, digit=scene.label,
        style=scene.style,
        psnr=psnr(g, gt.x, gt.mean_object, k=k),
        vis=vis(g, scene),
        cc=cc(g, gt.x),
        mse=mse_normalized(g, gt.x, gt.mean_object),
        k=k)


def write_report_csv(path, reports):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(QualityReport.CSV_FIELDS)
        for report in reports:
            writer.writerow(report.csv_row())
