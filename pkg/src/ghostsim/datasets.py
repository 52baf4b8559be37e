"""Scene construction: MNIST-style IDX ingestion and block-style digit glyphs.

Scenes are binary transmission maps (1 = light passes).  The production
geometry is 54 x 98; 28 x 28 digit images reach it by nearest-neighbor
upscaling to 54 rows and centering on the 98-column canvas.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .containers import write_pgm

SCENE_HEIGHT = 54
SCENE_WIDTH = 98

IDX_IMAGE_MAGIC = 2051
IDX_LABEL_MAGIC = 2049

_IMAGE_FILES = {"train": "train-images-idx3-ubyte", "test": "t10k-images-idx3-ubyte"}
_LABEL_FILES = {"train": "train-labels-idx1-ubyte", "test": "t10k-labels-idx1-ubyte"}


class IdxFormatError(ValueError):
    """Malformed or truncated IDX file; the message carries the byte position."""


@dataclass
class Scene:
    """Binary transmission map plus its digit label and glyph style."""

    transmission: np.ndarray
    label: int
    style: str = "handwriting"

    def __post_init__(self):
        t = np.asarray(self.transmission)
        if t.ndim != 2:
            raise ValueError(f"transmission must be 2-D, got shape {t.shape}")
        values = np.unique(t)
        if not np.all(np.isin(values, (0, 1))):
            raise ValueError("transmission must be binary (0/1)")
        if t.min() == t.max():
            raise ValueError("scene needs at least one transmitting and one blocked pixel")
        self.transmission = t.astype(np.uint8)
        if self.style not in ("handwriting", "block"):
            raise ValueError(f"unknown scene style {self.style!r}")

    @property
    def shape(self):
        return self.transmission.shape

    def export_pgm(self, path):
        write_pgm(path, self.transmission.astype(np.float64))


@dataclass
class Dataset:
    scenes: list = field(default_factory=list)
    split: str = "train"

    def __post_init__(self):
        if not self.scenes:
            raise ValueError("dataset must contain at least one scene")
        shapes = {s.shape for s in self.scenes}
        if len(shapes) != 1:
            raise ValueError(f"scenes disagree on dimensions: {sorted(shapes)}")
        if self.split not in ("train", "test"):
            raise ValueError(f"unknown split {self.split!r}")

    def __len__(self):
        return len(self.scenes)

    def __iter__(self):
        return iter(self.scenes)


def _open_maybe_gzip(path):
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(2)
    if head == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_exact(fh, n, what, offset):
    data = fh.read(n)
    if len(data) != n:
        raise IdxFormatError(
            f"truncated IDX file while reading {what}: wanted {n} bytes at "
            f"offset {offset}, got {len(data)}")
    return data


def read_idx_images(path, count=None):
    """Parse an IDX3 image file into a (count, rows, cols) uint8 array."""
    with _open_maybe_gzip(path) as fh:
        header = _read_exact(fh, 16, "image header", 0)
        magic, n_items, n_rows, n_cols = struct.unpack(">iiii", header)
        if magic != IDX_IMAGE_MAGIC:
            raise IdxFormatError(f"bad image magic {magic} at offset 0, expected {IDX_IMAGE_MAGIC}")
        if count is None:
            count = n_items
        if count > n_items:
            raise IdxFormatError(f"requested {count} images but file declares {n_items}")
        payload = _read_exact(fh, count * n_rows * n_cols, f"{count} images", 16)
    return np.frombuffer(payload, dtype=np.uint8).reshape(count, n_rows, n_cols)


def read_idx_labels(path, count=None):
    """Parse an IDX1 label file into a (count,) uint8 array."""
    with _open_maybe_gzip(path) as fh:
        header = _read_exact(fh, 8, "label header", 0)
        magic, n_items = struct.unpack(">ii", header)
        if magic != IDX_LABEL_MAGIC:
            raise IdxFormatError(f"bad label magic {magic} at offset 0, expected {IDX_LABEL_MAGIC}")
        if count is None:
            count = n_items
        if count > n_items:
            raise IdxFormatError(f"requested {count} labels but file declares {n_items}")
        payload = _read_exact(fh, count, f"{count} labels", 8)
    return np.frombuffer(payload, dtype=np.uint8).copy()


def write_idx(images, labels, images_path, labels_path):
    """Write uint8 images/labels in IDX format (fixture and export helper)."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    count, rows, cols = images.shape
    if labels.shape != (count,):
        raise ValueError("labels must be one per image")
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">iiii", IDX_IMAGE_MAGIC, count, rows, cols))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">ii", IDX_LABEL_MAGIC, count))
        fh.write(labels.tobytes())


def _find_idx_file(root, name):
    root = Path(root)
    for candidate in (root / name, root / (name + ".gz")):
        if candidate.exists():
            return candidate
    raise FileNotFoundError(f"no {name}[.gz] under {root}")


def load_mnist(path, count, split="train"):
    """Load the first ``count`` digits from an MNIST-layout directory.

    Images are binarized at half of full scale (pixel >= 128) and resized to
    the 54 x 98 scene geometry.
    """
    if count < 1:
        raise ValueError("count must be positive")
    images_file = _find_idx_file(path, _IMAGE_FILES[split])
    labels_file = _find_idx_file(path, _LABEL_FILES[split])
    images = read_idx_images(images_file, count)
    labels = read_idx_labels(labels_file, count)
    scenes = []
    for img, label in zip(images, labels):
        binary = (img >= 128).astype(np.uint8)
        scenes.append(resize_to_scene(binary, label=int(label), style="handwriting"))
    return Dataset(scenes=scenes, split=split)


def resize_to_scene(img, label=0, style="handwriting"):
    """Nearest-neighbor upscale of a 28 x 28 binary image onto the 54 x 98
    canvas: uniform scale to 54 rows, then horizontal centering with
    symmetric zero margins."""
    img = np.asarray(img)
    if not np.all(np.isin(np.unique(img), (0, 1))):
        raise ValueError("resize_to_scene expects a binary image")
    src_h, src_w = img.shape
    scale = SCENE_HEIGHT / src_h
    out_h = SCENE_HEIGHT
    out_w = int(round(src_w * scale))
    if out_w > SCENE_WIDTH:
        raise ValueError(f"scaled width {out_w} exceeds the {SCENE_WIDTH}-column canvas")
    # Pixel-center mapping: destination pixel r samples source floor((r+.5)/scale).
    rows = np.minimum((np.arange(out_h) + 0.5) * src_h / out_h, src_h - 1).astype(np.int64)
    cols = np.minimum((np.arange(out_w) + 0.5) * src_w / out_w, src_w - 1).astype(np.int64)
    upscaled = img[np.ix_(rows, cols)]
    canvas = np.zeros((SCENE_HEIGHT, SCENE_WIDTH), dtype=np.uint8)
    left = (SCENE_WIDTH - out_w) // 2
    canvas[:, left:left + out_w] = upscaled
    return Scene(transmission=canvas, label=label, style=style)


# Seven-segment glyph geometry, in glyph-box coordinates.  The box is 32 px
# tall (~60% of scene height) and 18 px wide; segments are disjoint
# rectangles so distinct segment sets always give distinct pixel sets.
_GLYPH_H = 32
_GLYPH_W = 18
_STROKE = 4

_SEGMENT_RECTS = {
    # name: (row0, row1, col0, col1), half-open
    "top": (0, _STROKE, _STROKE, _GLYPH_W - _STROKE),
    "mid": ((_GLYPH_H - _STROKE) // 2, (_GLYPH_H - _STROKE) // 2 + _STROKE,
            _STROKE, _GLYPH_W - _STROKE),
    "bottom": (_GLYPH_H - _STROKE, _GLYPH_H, _STROKE, _GLYPH_W - _STROKE),
    "top_left": (0, _GLYPH_H // 2, 0, _STROKE),
    "top_right": (0, _GLYPH_H // 2, _GLYPH_W - _STROKE, _GLYPH_W),
    "bottom_left": (_GLYPH_H // 2, _GLYPH_H, 0, _STROKE),
    "bottom_right": (_GLYPH_H // 2, _GLYPH_H, _GLYPH_W - _STROKE, _GLYPH_W),
}

_DIGIT_SEGMENTS = {
    0: ("top", "top_right", "bottom_right", "bottom", "bottom_left", "top_left"),
    1: ("top_right", "bottom_right"),
    2: ("top", "top_right", "mid", "bottom_left", "bottom"),
    3: ("top", "top_right", "mid", "bottom_right", "bottom"),
    4: ("top_left", "mid", "top_right", "bottom_right"),
    5: ("top", "top_left", "mid", "bottom_right", "bottom"),
    6: ("top", "top_left", "mid", "bottom_left", "bottom_right", "bottom"),
    7: ("top", "top_right", "bottom_right"),
    8: tuple(_SEGMENT_RECTS),
    9: ("top", "top_left", "top_right", "mid", "bottom_right", "bottom"),
}


def make_block_digit(d: int) -> Scene:
    """Seven-segment block glyph for digit d, centered on the 54 x 98 scene."""
    if d not in _DIGIT_SEGMENTS:
        raise ValueError(f"digit must be 0-9, got {d}")
    canvas = np.zeros((SCENE_HEIGHT, SCENE_WIDTH), dtype=np.uint8)
    row0 = (SCENE_HEIGHT - _GLYPH_H) // 2
    col0 = (SCENE_WIDTH - _GLYPH_W) // 2
    for name in _DIGIT_SEGMENTS[d]:
        r0, r1, c0, c1 = _SEGMENT_RECTS[name]
        canvas[row0 + r0:row0 + r1, col0 + c0:col0 + c1] = 1
    return Scene(transmission=canvas, label=d, style="block")
