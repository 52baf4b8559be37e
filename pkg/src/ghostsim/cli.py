"""Command-line entry points.

Every subcommand accepts ``--config FILE`` pointing at a JSON object whose
keys are flag names (dashes or underscores); explicit flags override config
values.  Example::

    {"family": "pink", "beta": 0.05, "epochs": 30, "pattern-seed": 7}

Subcommands:
    gen-patterns   synthesize and persist a speckle stack
    build-corpus   simulate a training corpus from an MNIST-layout dataset
    train          train the enhancer network and save a checkpoint
    eval           score scenes with and without a trained network
    figure         reproduce one comparison figure's data
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .containers import write_pgm, normalize01
from .datasets import load_mnist, make_block_digit
from .forward import NoiseSpec
from .metrics import write_report_csv
from .nn import NetworkArch, TrainConfig, save_checkpoint_file, train
from .pipeline import (METHOD_TIERS, SweepConfig, build_training_corpus,
                       evaluate, figure_sweep, make_stack)
from .recon import BETA_TIERS, GroundTruth, ReconImage
from .speckle import PatternSpec, generate


def _load_config(path):
    if path is None:
        return {}
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise SystemExit(f"config {path} must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def _merge(args, config, key, default=None):
    value = getattr(args, key, None)
    if value is not None:
        return value
    return config.get(key, default)


def _tier_count(beta):
    if beta not in BETA_TIERS:
        raise SystemExit(f"beta {beta} is not a documented tier; pick one of "
                         f"{sorted(BETA_TIERS)}")
    return BETA_TIERS[beta]


def _scenes_from(args, config):
    kind = _merge(args, config, "scenes", "block")
    digits = _merge(args, config, "digits", [2, 3, 5, 6])
    if isinstance(digits, str):
        digits = [int(d) for d in digits.split(",")]
    if kind == "block":
        return [make_block_digit(d) for d in digits]
    dataset_dir = _merge(args, config, "dataset_dir")
    if dataset_dir is None:
        raise SystemExit("handwriting scenes need --dataset-dir")
    count = int(_merge(args, config, "scan_count", 200))
    picked = {}
    for scene in load_mnist(dataset_dir, count):
        if scene.label in digits and scene.label not in picked:
            picked[scene.label] = scene
    missing = [d for d in digits if d not in picked]
    if missing:
        raise SystemExit(f"digits {missing} not found in the first {count} records")
    return [picked[d] for d in digits]


def cmd_gen_patterns(args):
    config = _load_config(args.config)
    beta = _merge(args, config, "beta")
    count = _merge(args, config, "count")
    if count is None:
        count = _tier_count(beta) if beta is not None else 265
    spec = PatternSpec(height=int(_merge(args, config, "height", 54)),
                       width=int(_merge(args, config, "width", 98)),
                       count=int(count),
                       family=_merge(args, config, "family", "pink"),
                       seed=int(_merge(args, config, "seed", 0)),
                       binarize=not bool(_merge(args, config, "grayscale", False)))
    stack = generate(spec)
    out = Path(_merge(args, config, "out", "patterns.gic"))
    stack.save(out)
    pgm = _merge(args, config, "pgm")
    if pgm is not None:
        stack.export_pgm(pgm, index=0)
    print(f"wrote {spec.count} {spec.family} patterns "
          f"({spec.height}x{spec.width}, seed {spec.seed}) to {out}")


def _build_pairs(args, config):
    dataset_dir = _merge(args, config, "dataset_dir")
    if dataset_dir is None:
        raise SystemExit("--dataset-dir is required")
    count = int(_merge(args, config, "count", 2000))
    family = _merge(args, config, "family", "pink")
    beta = float(_merge(args, config, "beta", 0.05))
    pattern_seed = int(_merge(args, config, "pattern_seed", 1))
    snr_db = _merge(args, config, "snr_db")
    noise = None
    if snr_db is not None:
        noise = NoiseSpec(float(snr_db), int(_merge(args, config, "noise_seed", 2)))
    dataset = load_mnist(dataset_dir, count)
    stack = make_stack(family, _tier_count(beta), pattern_seed)
    pairs = build_training_corpus(dataset, stack, noise)
    return pairs, dict(family=family, beta=beta, pattern_seed=pattern_seed,
                       snr_db=snr_db, count=count)


def cmd_build_corpus(args):
    config = _load_config(args.config)
    pairs, meta = _build_pairs(args, config)
    out = Path(_merge(args, config, "out", "corpus.npz"))
    np.savez(out,
             g=np.asarray([p[0].g for p in pairs], dtype=np.float64),
             x=np.asarray([p[1].x for p in pairs], dtype=np.float64),
             mean_object=np.asarray([p[1].mean_object for p in pairs]),
             mean_background=np.asarray([p[1].mean_background for p in pairs]),
             beta=np.float64(meta["beta"]),
             meta=json.dumps(meta, sort_keys=True))
    print(f"wrote {len(pairs)} pairs to {out}")


def _load_corpus(path):
    data = np.load(path, allow_pickle=False)
    meta = json.loads(str(data["meta"]))
    beta = float(data["beta"])
    pairs = []
    for g, x, mo, mb in zip(data["g"], data["x"], data["mean_object"],
                            data["mean_background"]):
        pairs.append((ReconImage(g=g, beta=beta),
                      GroundTruth(x=x, mean_object=float(mo),
                                  mean_background=float(mb))))
    return pairs, meta


def cmd_train(args):
    config = _load_config(args.config)
    corpus = _merge(args, config, "corpus")
    if corpus is not None:
        pairs, meta = _load_corpus(corpus)
    else:
        pairs, meta = _build_pairs(args, config)
    channels = _merge(args, config, "channels", "16,32,32,16")
    if isinstance(channels, str):
        channels = tuple(int(c) for c in channels.split(","))
    arch = NetworkArch(channels=tuple(channels),
                       dropout=float(_merge(args, config, "dropout", 0.2)))
    tc = TrainConfig(
        lr_initial=float(_merge(args, config, "lr", 1e-3)),
        lr_after_decay=float(_merge(args, config, "lr_decayed", 1e-4)),
        decay_epoch=int(_merge(args, config, "decay_epoch", 75)),
        max_epochs=int(_merge(args, config, "epochs", 100)),
        momentum=float(_merge(args, config, "momentum", 0.9)),
        batch_size=int(_merge(args, config, "batch", 32)),
        seed=int(_merge(args, config, "seed", 3)))
    net, history = train(pairs, arch, tc, log=print)
    out = Path(_merge(args, config, "out", "network.ckpt"))
    save_checkpoint_file(net, out)
    print(f"trained {tc.max_epochs} epochs on {len(pairs)} pairs of "
          f"{meta.get('family', '?')} reconstructions; final loss "
          f"{history[-1]:.6f}; checkpoint at {out}")


def cmd_eval(args):
    config = _load_config(args.config)
    family = _merge(args, config, "family", "pink")
    beta = float(_merge(args, config, "beta", 0.05))
    pattern_seed = int(_merge(args, config, "pattern_seed", 1))
    snr_db = _merge(args, config, "snr_db")
    noise = None
    if snr_db is not None:
        noise = NoiseSpec(float(snr_db), int(_merge(args, config, "noise_seed", 2)))
    scenes = _scenes_from(args, config)
    stack = make_stack(family, _tier_count(beta), pattern_seed)
    checkpoint = _merge(args, config, "checkpoint")
    reports, images = evaluate(checkpoint, scenes, stack, noise)

    out_dir = Path(_merge(args, config, "out_dir", "eval-run"))
    out_dir.mkdir(parents=True, exist_ok=True)
    write_report_csv(out_dir / "report.csv", reports)
    for (method, style, digit), recon in sorted(images.items()):
        stem = f"{method}_beta{beta:g}_{style}{digit}"
        recon.save(out_dir / f"{stem}.gic")
        recon.export_pgm(out_dir / f"{stem}.pgm")
    manifest = {"package_version": __version__, "family": family, "beta": beta,
                "snr_db": snr_db, "pattern_seed": pattern_seed,
                "noise_seed": None if noise is None else noise.seed,
                "checkpoint": str(checkpoint) if checkpoint else None}
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(reports)} report rows to {out_dir / 'report.csv'}")


def cmd_figure(args):
    config = _load_config(args.config)
    figure_id = int(_merge(args, config, "id"))
    checkpoint_dir = _merge(args, config, "checkpoint_dir")
    if checkpoint_dir is None:
        raise SystemExit("--checkpoint-dir is required")
    tiers = _merge(args, config, "method_tiers", METHOD_TIERS)
    tier_counts = _merge(args, config, "tier_counts", BETA_TIERS)
    cfg = SweepConfig(
        checkpoint_dir=checkpoint_dir,
        dataset_dir=_merge(args, config, "dataset_dir"),
        pattern_seed=int(_merge(args, config, "pattern_seed", 1)),
        noise_seed=int(_merge(args, config, "noise_seed", 2)),
        method_tiers={m: tuple(t) for m, t in tiers.items()},
        tier_counts={float(b): int(c) for b, c in tier_counts.items()},
        digits_full=tuple(_merge(args, config, "digits_full",
                                 (1, 2, 3, 4, 5, 6, 7, 8, 9))),
        digits_noise=tuple(_merge(args, config, "digits_noise", (2, 3, 5, 6))),
        handwriting_count=int(_merge(args, config, "handwriting_count", 200)))
    out_dir = Path(_merge(args, config, "out_dir", f"figure{figure_id}-run"))
    csv_path = figure_sweep(figure_id, out_dir, cfg)
    print(f"figure {figure_id} data under {out_dir} (report: {csv_path})")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ghostsim",
        description="Desk-scale computational ghost imaging toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON file of flag defaults")

    p = sub.add_parser("gen-patterns", help="synthesize a speckle stack")
    add_common(p)
    p.add_argument("--family", choices=("white", "pink"))
    p.add_argument("--count", type=int)
    p.add_argument("--beta", type=float, help="tier shorthand for --count")
    p.add_argument("--height", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--grayscale", action="store_const", const=True,
                   help="skip median binarization")
    p.add_argument("--out")
    p.add_argument("--pgm", help="also export pattern 0 as PGM")
    p.set_defaults(func=cmd_gen_patterns)

    p = sub.add_parser("build-corpus", help="simulate a training corpus")
    add_common(p)
    p.add_argument("--dataset-dir")
    p.add_argument("--count", type=int)
    p.add_argument("--family", choices=("white", "pink"))
    p.add_argument("--beta", type=float)
    p.add_argument("--snr-db", type=float)
    p.add_argument("--pattern-seed", type=int)
    p.add_argument("--noise-seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_build_corpus)

    p = sub.add_parser("train", help="train the enhancer network")
    add_common(p)
    p.add_argument("--dataset-dir")
    p.add_argument("--corpus", help="prebuilt corpus .npz (skips simulation)")
    p.add_argument("--count", type=int)
    p.add_argument("--family", choices=("white", "pink"))
    p.add_argument("--beta", type=float)
    p.add_argument("--snr-db", type=float)
    p.add_argument("--pattern-seed", type=int)
    p.add_argument("--noise-seed", type=int)
    p.add_argument("--channels", help="e.g. 16,32,32,16")
    p.add_argument("--dropout", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--lr-decayed", type=float)
    p.add_argument("--decay-epoch", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--momentum", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score scenes against a stack/network")
    add_common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--family", choices=("white", "pink"))
    p.add_argument("--beta", type=float)
    p.add_argument("--snr-db", type=float)
    p.add_argument("--scenes", choices=("block", "handwriting"))
    p.add_argument("--digits", help="comma list, e.g. 2,3,5,6")
    p.add_argument("--dataset-dir")
    p.add_argument("--pattern-seed", type=int)
    p.add_argument("--noise-seed", type=int)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("figure", help="reproduce one comparison figure")
    add_common(p)
    p.add_argument("--id", type=int, choices=(3, 4, 5, 6))
    p.add_argument("--checkpoint-dir")
    p.add_argument("--dataset-dir")
    p.add_argument("--pattern-seed", type=int)
    p.add_argument("--noise-seed", type=int)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_figure)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (ValueError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
