"""End-to-end flows: corpus construction, evaluation, and figure sweeps.

Three stages mirror the production protocol: (a) build a training corpus of
(reconstruction, ground truth) pairs from simulated measurements of a digit
database, (b) test trained networks on handwriting and block digits, and
(c) an "experiment" stand-in that repeats (b) under injected detector noise
at matched SNR.

Conventions:
  - one pattern stack is shared by every scene within a corpus or sweep;
  - per-scene noise draws derive from a base seed and the scene index;
  - quality metrics are computed on min-max normalized images (8-bit
    display convention), while emitted containers keep raw values.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .containers import normalize01, write_pgm
from .datasets import Dataset, Scene, load_mnist, make_block_digit
from .forward import BucketSeries, NoiseSpec, add_noise, measure
from .metrics import QualityReport, score, write_report_csv
from .nn import Network, load_checkpoint_file
from .recon import (BETA_TIERS, ReconImage, beta_for, ground_truth,
                    reconstruct)
from .speckle import PatternSpec, generate

# Per-method sampling-ratio tiers used by the comparison figures.
METHOD_TIERS = {
    "cgi-white": (0.10, 0.50, 1.00),
    "dl-white": (0.01, 0.05, 0.50),
    "dl-pink": (0.005, 0.008, 0.05),
}

FIGURE_IDS = (3, 4, 5, 6)


def child_seed(seed, index):
    """Stable per-item seed derived from a base seed and an index."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class RunConfig:
    """One (family, tier) run: where its patterns, noise, and model come from."""

    family: str = "pink"
    beta: float = 0.05
    snr_db: float | None = None
    dataset: str = "block"
    pattern_seed: int = 1
    noise_seed: int = 2
    train_seed: int = 3
    checkpoint: str | None = None

    def __post_init__(self):
        if self.family not in ("white", "pink"):
            raise ValueError(f"unknown pattern family {self.family!r}")
        if self.beta not in BETA_TIERS:
            raise ValueError(
                f"beta {self.beta} is not a documented tier; pick one of "
                f"{sorted(BETA_TIERS)}")
        if self.dataset not in ("handwriting-train", "handwriting-holdout", "block"):
            raise ValueError(f"unknown dataset selection {self.dataset!r}")

    @property
    def pattern_count(self):
        return BETA_TIERS[self.beta]


def make_stack(family, count, seed, height=54, width=98):
    spec = PatternSpec(height=height, width=width, count=count, family=family,
                       seed=seed, binarize=True)
    return generate(spec)


def simulate_recon(scene: Scene, stack, noise: NoiseSpec | None,
                   scene_index=0) -> ReconImage:
    """measure -> (optional) noise -> correlation reconstruction."""
    series = measure(scene, stack)
    if noise is not None and noise.snr_db is not None:
        series = add_noise(series, NoiseSpec(noise.snr_db,
                                             child_seed(noise.seed, scene_index)))
    return reconstruct(stack, series)


def build_training_corpus(dataset, stack, noise: NoiseSpec | None = None):
    """Corpus of (ReconImage, GroundTruth) pairs, in dataset order.

    The ground truth is the two-level image of the raw reconstruction, so a
    trained network learns to flatten its input toward per-class means.
    Measurement and reconstruction are batched over scenes (one gemm each);
    noise still goes through ``add_noise`` scene by scene with derived seeds,
    so a corpus entry matches what ``simulate_recon`` produces for the same
    scene up to floating-point summation order.
    """
    scenes = list(dataset)
    if not scenes:
        raise ValueError("empty dataset")
    count = stack.count
    if count < 2:
        raise ValueError("covariance reconstruction needs at least 2 patterns")
    height, width = stack.spec.height, stack.spec.width
    if scenes[0].shape != (height, width):
        raise ValueError(f"scene shape {scenes[0].shape} does not match stack")

    flat = stack.patterns.reshape(count, -1)
    transmissions = np.stack([s.transmission for s in scenes])
    buckets = (transmissions.reshape(len(scenes), -1).astype(np.float32)
               @ flat.T).astype(np.float64)
    ref = f"{stack.spec.family}-seed{stack.spec.seed}-n{count}"
    if noise is not None and noise.snr_db is not None:
        for i in range(len(scenes)):
            series = BucketSeries(values=buckets[i], pattern_ref=ref)
            buckets[i] = add_noise(series, NoiseSpec(
                noise.snr_db, child_seed(noise.seed, i))).values

    centered_p = flat.astype(np.float64)
    centered_p -= centered_p.mean(axis=0)
    centered_b = buckets - buckets.mean(axis=1, keepdims=True)
    g_all = (centered_b @ centered_p) / count
    beta = beta_for(count, height, width)

    pairs = []
    for scene, g in zip(scenes, g_all):
        recon = ReconImage(g=g.reshape(height, width), beta=beta)
        pairs.append((recon, ground_truth(scene, recon)))
    return pairs


def _as_network(net):
    if net is None or isinstance(net, Network):
        return net
    return load_checkpoint_file(net)


def enhance(net: Network, recon: ReconImage) -> ReconImage:
    """Run one raw reconstruction through a trained network (eval mode)."""
    x = normalize01(recon.g).astype(np.float32)[None]
    out, _ = net.forward(x, mode="eval")
    return ReconImage(g=out[0].astype(np.float64), beta=recon.beta,
                      source="dl_output")


def evaluate(net, scenes, stack, noise: NoiseSpec | None = None, k=8):
    """Score every scene under one stack, with and without the network.

    Returns (reports, images): one "cgi-<family>" row per scene from the raw
    reconstruction, plus one "dl-<family>" row when ``net`` (a Network or a
    checkpoint path) is given.  ``images`` maps (method, style, digit) to the
    raw ReconImage so every report row can be recomputed from stored data.
    """
    net = _as_network(net)
    family = stack.spec.family
    snr_db = noise.snr_db if noise is not None else None
    reports, images = [], {}
    for i, scene in enumerate(scenes):
        recon = simulate_recon(scene, stack, noise, scene_index=i)
        reports.append(score(normalize01(recon.g), scene,
                             method=f"cgi-{family}", beta=recon.beta,
                             snr_db=snr_db, k=k))
        images[(f"cgi-{family}", scene.style, scene.label)] = recon
        if net is not None:
            out = enhance(net, recon)
            reports.append(score(normalize01(out.g), scene,
                                 method=f"dl-{family}", beta=out.beta,
                                 snr_db=snr_db, k=k))
            images[(f"dl-{family}", scene.style, scene.label)] = out
    return reports, images


# ---------------------------------------------------------------------------
# Figure sweeps
# ---------------------------------------------------------------------------

@dataclass
class SweepConfig:
    """Inputs of a figure sweep; everything that affects bytes on disk."""

    checkpoint_dir: str
    dataset_dir: str | None = None
    pattern_seed: int = 1
    noise_seed: int = 2
    method_tiers: dict = field(default_factory=lambda: dict(METHOD_TIERS))
    tier_counts: dict = field(default_factory=lambda: dict(BETA_TIERS))
    digits_full: tuple = (1, 2, 3, 4, 5, 6, 7, 8, 9)
    digits_noise: tuple = (2, 3, 5, 6)
    handwriting_count: int = 200
    height: int = 54
    width: int = 98

    def counts_for(self, method):
        return [self.tier_counts[b] for b in self.method_tiers[method]]


def checkpoint_path(checkpoint_dir, family, count):
    return Path(checkpoint_dir) / f"dl_{family}_n{count}.ckpt"


def _require_checkpoint(cfg: SweepConfig, family, count, beta):
    path = checkpoint_path(cfg.checkpoint_dir, family, count)
    if not path.exists():
        raise FileNotFoundError(
            f"missing checkpoint {path}; train it first, e.g.\n"
            f"  ghostsim train --family {family} --beta {beta} "
            f"--dataset-dir <mnist-root> --out {path}")
    return path


def _handwriting_digits(cfg: SweepConfig, digits):
    if cfg.dataset_dir is None:
        raise ValueError("this figure needs handwriting digits; set dataset_dir")
    dataset = load_mnist(cfg.dataset_dir, cfg.handwriting_count)
    picked = {}
    for scene in dataset:
        if scene.label in digits and scene.label not in picked:
            picked[scene.label] = scene
    missing = [d for d in digits if d not in picked]
    if missing:
        raise ValueError(f"digits {missing} not found in the first "
                         f"{cfg.handwriting_count} dataset entries")
    return [picked[d] for d in digits]


def _block_digits(digits):
    return [make_block_digit(d) for d in digits]


def _method_plan(cfg: SweepConfig, methods=None, tiers=None):
    """Expand (method, beta, count, is_dl, family) work items."""
    plan = []
    for method in (methods or cfg.method_tiers):
        family = method.split("-")[1]
        is_dl = method.startswith("dl-")
        betas = tiers if tiers is not None else cfg.method_tiers[method]
        for beta in betas:
            plan.append((method, beta, cfg.tier_counts[beta], is_dl, family))
    return plan


class _StackCache(dict):
    def get_stack(self, cfg, family, count):
        key = (family, count)
        if key not in self:
            self[key] = make_stack(family, count, cfg.pattern_seed,
                                   cfg.height, cfg.width)
        return self[key]


def _sweep_rows(cfg: SweepConfig, scenes, snr_db, plan, stacks, nets,
                noise_index=0):
    """Evaluate every planned (method, tier) against every scene."""
    reports, images = [], {}
    for method, beta, count, is_dl, family in plan:
        stack = stacks.get_stack(cfg, family, count)
        noise = None
        if snr_db is not None:
            noise = NoiseSpec(snr_db, child_seed(cfg.noise_seed,
                                                 1000 * noise_index + count))
        net = nets.get((family, count)) if is_dl else None
        for i, scene in enumerate(scenes):
            recon = simulate_recon(scene, stack, noise, scene_index=i)
            out = enhance(net, recon) if is_dl else recon
            reports.append(score(normalize01(out.g), scene, method=method,
                                 beta=beta, snr_db=snr_db))
            images[(method, beta, scene.style, scene.label)] = out
    return reports, images


def _save_images(run_dir, tag, images):
    image_dir = Path(run_dir) / "images"
    image_dir.mkdir(parents=True, exist_ok=True)
    for (method, beta, style, digit), recon in sorted(images.items()):
        stem = f"{tag}_{method}_beta{beta:g}_{style}{digit}"
        recon.save(image_dir / f"{stem}.gic")
        recon.export_pgm(image_dir / f"{stem}.pgm")


def _montage(cells, pad=2, level=1.0):
    """Tile a 2-D grid of equally sized [0,1] images into one image."""
    rows = len(cells)
    cols = len(cells[0])
    h, w = cells[0][0].shape
    grid = np.full((rows * h + pad * (rows + 1), cols * w + pad * (cols + 1)),
                   level, dtype=np.float64)
    for r in range(rows):
        for c in range(cols):
            top = pad + r * (h + pad)
            left = pad + c * (w + pad)
            grid[top:top + h, left:left + w] = cells[r][c]
    return grid


def _grid_pgm(path, scenes, images, plan):
    cells = [[scene.transmission.astype(np.float64) for scene in scenes]]
    for method, beta, count, is_dl, family in plan:
        cells.append([normalize01(images[(method, beta, s.style, s.label)].g)
                      for s in scenes])
    write_pgm(path, _montage(cells))


def figure_sweep(figure_id, run_dir, cfg: SweepConfig):
    """Reproduce one comparison figure's data at desk scale.

    figure 3: noiseless, every method at the 5% tier, digits 1-9 in both
              styles; 4: SNR 4.77 dB, per-method tier sets, digits 2/3/5/6
              in both styles; 5: the experiment stand-in, block digits at
              SNR 14.90 and 4.77 dB; 6: the metric table for figures 3-5.

    Writes a manifest, a CSV of quality rows, raw image containers, PGM
    previews, and (figures 3-5) one montage per style/condition.  Output
    bytes are a pure function of ``cfg``.
    """
    if figure_id not in FIGURE_IDS:
        raise ValueError(f"unknown figure id {figure_id}; expected one of {FIGURE_IDS}")
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    stacks = _StackCache()

    # Every DL (family, count) cell must have a trained checkpoint up front.
    dl_plan = _method_plan(cfg, methods=[m for m in cfg.method_tiers
                                         if m.startswith("dl-")],
                           tiers=[0.05] if figure_id == 3 else None)
    nets = {}
    for method, beta, count, is_dl, family in dl_plan:
        path = _require_checkpoint(cfg, family, count, beta)
        nets[(family, count)] = load_checkpoint_file(path)

    all_reports = []
    conditions = []
    if figure_id == 3:
        plan = _method_plan(cfg, tiers=[0.05])
        scenes = (_handwriting_digits(cfg, cfg.digits_full)
                  + _block_digits(cfg.digits_full))
        conditions.append(("noiseless", None, scenes, plan))
    elif figure_id == 4:
        plan = _method_plan(cfg)
        scenes = (_handwriting_digits(cfg, cfg.digits_noise)
                  + _block_digits(cfg.digits_noise))
        conditions.append(("snr4.77", 4.77, scenes, plan))
    elif figure_id == 5:
        plan = _method_plan(cfg)
        scenes = _block_digits(cfg.digits_noise)
        conditions.append(("snr14.90", 14.90, scenes, plan))
        conditions.append(("snr4.77", 4.77, scenes, plan))
    else:  # figure 6: metric table over all conditions of figures 3-5
        plan = _method_plan(cfg)
        scenes = _block_digits(cfg.digits_noise)
        conditions.append(("sim-noiseless", None, scenes, plan))
        conditions.append(("sim-snr4.77", 4.77, scenes, plan))
        conditions.append(("exp-snr14.90", 14.90, scenes, plan))
        conditions.append(("exp-snr4.77", 4.77, scenes, plan))

    condition_rows = []
    for index, (tag, snr_db, scenes, plan) in enumerate(conditions):
        reports, images = _sweep_rows(cfg, scenes, snr_db, plan, stacks, nets,
                                      noise_index=index)
        all_reports.extend(reports)
        condition_rows.append((tag, reports))
        _save_images(run_dir, f"fig{figure_id}_{tag}", images)
        if figure_id != 6:
            for style in sorted({s.style for s in scenes}):
                style_scenes = [s for s in scenes if s.style == style]
                _grid_pgm(run_dir / f"figure{figure_id}_{tag}_{style}.pgm",
                          style_scenes, images, plan)

    csv_path = run_dir / f"figure{figure_id}_report.csv"
    if figure_id == 6:
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("condition",) + QualityReport.CSV_FIELDS)
            for tag, reports in condition_rows:
                for report in reports:
                    writer.writerow([tag] + report.csv_row())
    else:
        write_report_csv(csv_path, all_reports)

    manifest = {
        "figure": figure_id,
        "package_version": __version__,
        "geometry": [cfg.height, cfg.width],
        "pattern_seed": cfg.pattern_seed,
        "noise_seed": cfg.noise_seed,
        "method_tiers": {m: list(t) for m, t in cfg.method_tiers.items()},
        "tier_counts": {str(b): c for b, c in sorted(cfg.tier_counts.items())},
        "digits_full": list(cfg.digits_full),
        "digits_noise": list(cfg.digits_noise),
        "checkpoints": {f"{family}_n{count}": str(checkpoint_path(
            cfg.checkpoint_dir, family, count))
            for (family, count) in sorted(nets)},
        "dataset_dir": str(cfg.dataset_dir) if cfg.dataset_dir else None,
    }
    with open(run_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path
