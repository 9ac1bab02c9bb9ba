"""Checkpoint container: magic, JSON header, raw little-endian payloads.

Layout::

    b"BEACCKPT"            8 bytes
    u32 header_len         little-endian
    header                 UTF-8 JSON, keys sorted
    payload                tensors back to back, offsets relative to payload start

The header holds ``format_version``, free-form ``meta`` and a ``tensors``
map of ``name -> {shape, dtype, byte_offset, nbytes}``.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any, Mapping

import numpy as np

MAGIC = b"BEACCKPT"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def dumps(tensors: Mapping[str, np.ndarray], meta: Mapping[str, Any] | None = None) -> bytes:
    entries = {}
    chunks = []
    offset = 0
    for name in sorted(tensors):
        arr = np.asarray(tensors[name])
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        raw = np.ascontiguousarray(le).tobytes()
        entries[name] = {
            "shape": list(arr.shape),
            "dtype": le.dtype.str,
            "byte_offset": offset,
            "nbytes": len(raw),
        }
        chunks.append(raw)
        offset += len(raw)
    header = json.dumps(
        {"format_version": FORMAT_VERSION, "meta": dict(meta or {}), "tensors": entries},
        sort_keys=True,
    ).encode("utf-8")
    return MAGIC + struct.pack("<I", len(header)) + header + b"".join(chunks)


def loads(blob: bytes) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    if blob[:8] != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic)")
    if len(blob) < 12:
        raise CheckpointError("truncated checkpoint header")
    (hlen,) = struct.unpack("<I", blob[8:12])
    try:
        header = json.loads(blob[12 : 12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {header.get('format_version')!r}")
    payload = memoryview(blob)[12 + hlen :]
    tensors = {}
    for name, e in header["tensors"].items():
        start, n = e["byte_offset"], e["nbytes"]
        if start + n > len(payload):
            raise CheckpointError(f"truncated payload for tensor {name!r}")
        arr = np.frombuffer(payload[start : start + n], dtype=np.dtype(e["dtype"]))
        tensors[name] = arr.reshape(e["shape"]).astype(np.dtype(e["dtype"]).newbyteorder("="))
    return tensors, header["meta"]


def save_checkpoint(path, tensors: Mapping[str, np.ndarray], meta: Mapping[str, Any] | None = None) -> None:
    Path(path).write_bytes(dumps(tensors, meta))


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    return loads(Path(path).read_bytes())
