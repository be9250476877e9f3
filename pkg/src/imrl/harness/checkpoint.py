"""Self-describing binary checkpoints.

Layout: 16-byte header (magic + version), a length-prefixed JSON metadata
block (config echo, scalar state, array manifest), the raw little-endian
array payload in manifest order, and a trailing CRC32 over everything that
precedes it. Arrays round-trip bitwise.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

MAGIC = b"IMRLCKPT"
VERSION = 1

_DTYPES = {"<f8": np.dtype("<f8"), "<i8": np.dtype("<i8"), "|b1": np.dtype("|b1")}


class CheckpointError(RuntimeError):
    pass


def _dtype_code(arr: np.ndarray) -> str:
    if arr.dtype == np.float64:
        return "<f8"
    if arr.dtype == np.int64:
        return "<i8"
    if arr.dtype == np.bool_:
        return "|b1"
    raise CheckpointError(f"unsupported array dtype {arr.dtype}")


def save_checkpoint(path, config: dict, scalars: dict, arrays: dict[str, np.ndarray]) -> None:
    manifest = []
    payload = bytearray()
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        code = _dtype_code(arr)
        manifest.append({"name": name, "dtype": code, "shape": list(arr.shape)})
        payload += arr.astype(_DTYPES[code], copy=False).tobytes()
    meta = json.dumps(
        {"config": config, "scalars": scalars, "arrays": manifest}, sort_keys=True
    ).encode("utf-8")
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<II", VERSION, 0)
    blob += struct.pack("<Q", len(meta))
    blob += meta
    blob += payload
    blob += struct.pack("<I", zlib.crc32(bytes(blob)))
    Path(path).write_bytes(bytes(blob))


def load_checkpoint(path):
    """Returns (config, scalars, arrays); raises CheckpointError on any corruption."""
    raw = Path(path).read_bytes()
    if len(raw) < 28:
        raise CheckpointError("truncated checkpoint: shorter than header")
    if raw[:8] != MAGIC:
        raise CheckpointError("bad magic: not a checkpoint file")
    version, _ = struct.unpack("<II", raw[8:16])
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (crc_stored,) = struct.unpack("<I", raw[-4:])
    if zlib.crc32(raw[:-4]) != crc_stored:
        raise CheckpointError("checksum mismatch: checkpoint is corrupt")
    (meta_len,) = struct.unpack("<Q", raw[16:24])
    meta_end = 24 + meta_len
    if meta_end > len(raw) - 4:
        raise CheckpointError("truncated checkpoint: metadata overruns payload")
    meta = json.loads(raw[24:meta_end].decode("utf-8"))
    arrays = {}
    offset = meta_end
    for entry in meta["arrays"]:
        dtype = _DTYPES[entry["dtype"]]
        shape = tuple(entry["shape"])
        nbytes = dtype.itemsize * int(np.prod(shape, dtype=np.int64)) if shape else dtype.itemsize
        end = offset + nbytes
        if end > len(raw) - 4:
            raise CheckpointError(f"truncated checkpoint: array {entry['name']} overruns file")
        arrays[entry["name"]] = np.frombuffer(raw[offset:end], dtype=dtype).reshape(shape).copy()
        offset = end
    if offset != len(raw) - 4:
        raise CheckpointError("payload length mismatch")
    return meta["config"], meta["scalars"], arrays


checkpoint_save = save_checkpoint
checkpoint_load = load_checkpoint
