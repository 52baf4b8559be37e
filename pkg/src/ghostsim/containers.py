"""Binary container used to persist pattern stacks and reconstructed images.

One fixed-layout header is shared by both payload kinds so a single loader
can sniff any ``.gic`` file.  All integers are little-endian; image data is
row-major 32-bit IEEE float.

Byte layout (header is 40 bytes)::

    offset  size  field
    ------  ----  -----------------------------------------------
         0     4  magic, b"GIC1"
         4     2  format version (currently 1), uint16
         6     1  kind: 0 = pattern stack, 1 = raw CGI image, 2 = network output
         7     1  spectral family: 0 = white, 1 = pink, 255 = not applicable
         8     4  height in pixels, uint32
        12     4  width in pixels, uint32
        16     4  image count, uint32
        20     1  flags: bit 0 = binarized
        21     3  reserved, zero
        24     8  RNG seed, uint64 (zero when not applicable)
        32     8  sampling ratio beta, float64 (zero for pattern stacks)
        40     -  count * height * width float32 values, row-major

PGM export uses the binary ``P5`` format with maxval 255 and is intended for
eyeballing patterns and reconstructions, not for round-tripping data.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"GIC1"
VERSION = 1
HEADER = struct.Struct("<4sHBBIIIB3xQd")

KIND_PATTERN_STACK = 0
KIND_RAW_CGI = 1
KIND_NETWORK_OUTPUT = 2

FAMILY_CODES = {"white": 0, "pink": 1, None: 255}
FAMILY_NAMES = {v: k for k, v in FAMILY_CODES.items()}


class ContainerError(ValueError):
    """Raised for malformed, truncated, or wrong-version container files."""


def write_container(path, images, *, kind, family=None, seed=0, binarize=False,
                    beta=0.0):
    """Write a (count, height, width) float array as a .gic file."""
    images = np.ascontiguousarray(images, dtype=np.float32)
    if images.ndim != 3:
        raise ValueError(f"expected a (count, height, width) array, got shape {images.shape}")
    count, height, width = images.shape
    flags = 1 if binarize else 0
    header = HEADER.pack(MAGIC, VERSION, kind, FAMILY_CODES[family],
                         height, width, count, flags, seed, beta)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(images.astype("<f4", copy=False).tobytes())


def read_container(path):
    """Read a .gic file; returns (images, meta dict).

    Raises ContainerError on bad magic, unsupported version, or a payload
    whose length does not match the header exactly.
    """
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise ContainerError(f"{path}: file shorter than the {HEADER.size}-byte header")
    magic, version, kind, family_code, height, width, count, flags, seed, beta = \
        HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ContainerError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise ContainerError(f"{path}: unsupported container version {version}")
    if family_code not in FAMILY_NAMES:
        raise ContainerError(f"{path}: unknown family code {family_code}")
    expected = HEADER.size + 4 * count * height * width
    if len(raw) != expected:
        raise ContainerError(
            f"{path}: payload length mismatch, file has {len(raw)} bytes, "
            f"header implies {expected}")
    images = np.frombuffer(raw, dtype="<f4", offset=HEADER.size)
    images = images.reshape(count, height, width).copy()
    meta = {
        "kind": kind,
        "family": FAMILY_NAMES[family_code],
        "seed": seed,
        "binarize": bool(flags & 1),
        "beta": beta,
    }
    return images, meta


def write_pgm(path, image):
    """Export one 2-D image in [0, 1] as a binary (P5) PGM, maxval 255."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError(f"PGM export needs a 2-D image, got shape {image.shape}")
    levels = np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    height, width = levels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(levels.tobytes())


def normalize01(image):
    """Min-max scale an image to [0, 1]; a constant image maps to all zeros."""
    image = np.asarray(image, dtype=np.float64)
    lo = float(image.min())
    hi = float(image.max())
    if hi == lo:
        return np.zeros_like(image)
    return (image - lo) / (hi - lo)
