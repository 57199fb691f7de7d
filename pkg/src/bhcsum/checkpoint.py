"""Single-file checkpoint container.

Layout::

    8 bytes   magic  b"BHCCKPT\\0"
    4 bytes   format version (uint32, little endian)
    8 bytes   header length in bytes (uint64, little endian)
    N bytes   UTF-8 JSON header: {"kind", "config", "meta", "tensors": [...]}
    ...       raw little-endian tensor payloads, in header order

Each tensor entry records name, dtype, shape, offset (relative to the start
of the payload section) and nbytes, so a reader never needs pickle.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any

import numpy as np

from .errors import CheckpointError

MAGIC = b"BHCCKPT\0"
FORMAT_VERSION = 1


def write_checkpoint(
    path: str | Path,
    kind: str,
    config: dict[str, Any],
    tensors: dict[str, np.ndarray],
    meta: dict[str, Any] | None = None,
) -> None:
    entries = []
    payloads = []
    offset = 0
    for name in tensors:
        arr = np.ascontiguousarray(tensors[name])
        arr = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        raw = arr.tobytes()
        entries.append(
            {
                "name": name,
                "dtype": arr.dtype.str,
                "shape": list(arr.shape),
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        payloads.append(raw)
        offset += len(raw)
    header = json.dumps(
        {"kind": kind, "config": config, "meta": meta or {}, "tensors": entries},
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for raw in payloads:
            fh.write(raw)


def read_checkpoint(path: str | Path, kind: str | None = None):
    """Return ``(config, tensors, meta)``; tensors is an ordered dict of arrays."""
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    (version,) = struct.unpack("<I", data[8:12])
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")
    (hlen,) = struct.unpack("<Q", data[12:20])
    header = json.loads(data[20 : 20 + hlen].decode("utf-8"))
    if kind is not None and header["kind"] != kind:
        raise CheckpointError(f"{path}: expected a {kind!r} checkpoint, found {header['kind']!r}")
    base = 20 + hlen
    tensors = {}
    for entry in header["tensors"]:
        start = base + entry["offset"]
        buf = data[start : start + entry["nbytes"]]
        arr = np.frombuffer(buf, dtype=np.dtype(entry["dtype"])).reshape(entry["shape"])
        tensors[entry["name"]] = arr.copy()
    return header["config"], tensors, header["meta"]
