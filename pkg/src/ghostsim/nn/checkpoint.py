"""Checkpoint format: versioned header, raw tensors, trailing CRC-32.

Layout::

    offset  size  field
    ------  ----  ------------------------------------------
         0     4  magic, b"GICK"
         4     2  format version (currently 1), uint16
         6     4  length L of the JSON header, uint32 LE
        10     L  JSON header (ascii, sorted keys)
      10+L     -  tensor payloads, concatenated in header order
        -4     4  CRC-32 of all preceding bytes, uint32 LE

The JSON header records the architecture, iteration counter, and a manifest
of (name, group, shape, dtype) for every tensor: parameters, batch-norm
running statistics, and optimizer momentum buffers.  Tensors are serialized
little-endian in their native width, so save -> load -> save is bit-exact.
"""

from __future__ import annotations

import json
import struct
import zlib

import numpy as np

from .network import Network, NetworkArch

MAGIC = b"GICK"
VERSION = 1


class CheckpointError(ValueError):
    """Corrupt, truncated, or version-incompatible checkpoint data."""


def _manifest(net: Network):
    entries = []
    for group, tensors in (("param", net.params), ("state", net.state),
                           ("velocity", net.velocity)):
        for name in sorted(tensors):
            arr = tensors[name]
            entries.append({"name": name, "group": group,
                            "shape": list(arr.shape),
                            "dtype": arr.dtype.newbyteorder("<").str})
    return entries


def save_checkpoint(net: Network) -> bytes:
    header = {
        "arch": {
            "input_hw": list(net.arch.input_hw),
            "channels": list(net.arch.channels),
            "dropout": net.arch.dropout,
        },
        "dtype": net.dtype.newbyteorder("<").str,
        "iteration": net.iteration,
        "tensors": _manifest(net),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("ascii")
    parts = [MAGIC, struct.pack("<HI", VERSION, len(header_bytes)), header_bytes]
    groups = {"param": net.params, "state": net.state, "velocity": net.velocity}
    for entry in header["tensors"]:
        arr = groups[entry["group"]][entry["name"]]
        parts.append(np.ascontiguousarray(arr).astype(entry["dtype"], copy=False).tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def load_checkpoint(blob: bytes) -> Network:
    if len(blob) < 14:
        raise CheckpointError("checkpoint shorter than its fixed header")
    if blob[:4] != MAGIC:
        raise CheckpointError(f"bad checkpoint magic {blob[:4]!r}")
    version, header_len = struct.unpack_from("<HI", blob, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    body, tail = blob[:-4], blob[-4:]
    if len(tail) != 4 or struct.unpack("<I", tail)[0] != zlib.crc32(body):
        raise CheckpointError("checksum mismatch; checkpoint is corrupt")
    try:
        header = json.loads(blob[10:10 + header_len].decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint header: {exc}") from exc

    arch = NetworkArch(input_hw=tuple(header["arch"]["input_hw"]),
                       channels=tuple(header["arch"]["channels"]),
                       dropout=header["arch"]["dropout"])
    net = Network(arch, dtype=np.dtype(header["dtype"]), init=False)
    net.iteration = int(header["iteration"])
    groups = {"param": net.params, "state": net.state, "velocity": net.velocity}
    offset = 10 + header_len
    for entry in header["tensors"]:
        dtype = np.dtype(entry["dtype"])
        shape = tuple(entry["shape"])
        nbytes = dtype.itemsize * int(np.prod(shape, dtype=np.int64)) if shape else dtype.itemsize
        data = body[offset:offset + nbytes]
        if len(data) != nbytes:
            raise CheckpointError(f"tensor {entry['name']!r} truncated")
        target = groups[entry["group"]]
        if entry["name"] not in target:
            raise CheckpointError(f"tensor {entry['name']!r} not part of the architecture")
        arr = np.frombuffer(data, dtype=dtype).reshape(shape).copy()
        if arr.shape != target[entry["name"]].shape:
            raise CheckpointError(f"tensor {entry['name']!r} shape mismatch")
        target[entry["name"]] = arr
        offset += nbytes
    if offset != len(body):
        raise CheckpointError("checkpoint carries unexpected trailing bytes")
    return net


def save_checkpoint_file(net: Network, path):
    with open(path, "wb") as fh:
        fh.write(save_checkpoint(net))


def load_checkpoint_file(path) -> Network:
    with open(path, "rb") as fh:
        return load_checkpoint(fh.read())
