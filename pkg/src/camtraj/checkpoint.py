"""Versioned binary checkpoint container.

Layout: 8-byte magic, uint64 little-endian header length, JSON header
(sorted keys), then raw little-endian array bytes in header order. Writing
the same payload twice produces identical bytes, which the determinism
contract relies on (archive formats with timestamps would break it).
"""

from __future__ import annotations

import json
import struct
from typing import Mapping

import numpy as np

from .errors import CheckpointError

MAGIC = b"CAMTCKPT"
VERSION = 1


def write_checkpoint(path, kind: str, config: dict, arrays: Mapping[str, np.ndarray]) -> None:
    """Serialize config plus named arrays. Arrays are stored in name order."""
    names = sorted(arrays)
    entries = []
    offset = 0
    blobs = []
    for name in names:
        arr = np.ascontiguousarray(arrays[name])
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        blob = le.tobytes()
        entries.append(
            {
                "name": name,
                "dtype": arr.dtype.name,
                "shape": list(arr.shape),
                "offset": offset,
                "nbytes": len(blob),
            }
        )
        blobs.append(blob)
        offset += len(blob)
    header = json.dumps(
        {"version": VERSION, "kind": kind, "config": config, "arrays": entries},
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def read_checkpoint(path) -> tuple:
    """Returns (kind, config, arrays dict)."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise CheckpointError(f"bad magic {magic!r}")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header.get("version") != VERSION:
            raise CheckpointError(f"unsupported version {header.get('version')}")
        payload = fh.read()
    arrays = {}
    for entry in header["arrays"]:
        start, n = entry["offset"], entry["nbytes"]
        if start + n > len(payload):
            raise CheckpointError(f"array {entry['name']} extends past end of file")
        buf = payload[start : start + n]
        dtype = np.dtype(entry["dtype"]).newbyteorder("<")
        arr = np.frombuffer(buf, dtype=dtype).reshape(entry["shape"])
        arrays[entry["name"]] = arr.astype(np.dtype(entry["dtype"]), copy=True)
    return header["kind"], header["config"], arrays
