"""Deterministic binary container for model files and graph caches.

Layout: magic ``SSEG``, version u32, entry count u32, then per entry
(sorted by name): name (u16 length + utf8), dtype string (u16 + utf8),
ndim (u8), dims (u64 each), raw little-endian C-order payload. No
timestamps, so identical content yields identical bytes.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"SSEG"
VERSION = 1


class ContainerError(Exception):
    pass


def save(path: str, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    entries = dict(arrays)
    if meta is not None:
        entries["__meta__"] = np.frombuffer(
            json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8
        ).copy()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(entries)))
        for name in sorted(entries):
            arr = np.ascontiguousarray(entries[name])
            if arr.dtype.byteorder == ">":
                arr = arr.astype(arr.dtype.newbyteorder("<"))
            nb = name.encode()
            db = arr.dtype.str.encode()
            f.write(struct.pack("<H", len(nb)) + nb)
            f.write(struct.pack("<H", len(db)) + db)
            f.write(struct.pack("<B", arr.ndim))
            for d in arr.shape:
                f.write(struct.pack("<Q", d))
            f.write(arr.tobytes())


def load(path: str) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise ContainerError(f"{path}: bad magic")
        version, count = struct.unpack("<II", f.read(8))
        if version != VERSION:
            raise ContainerError(f"{path}: unsupported version {version}")
        arrays: dict[str, np.ndarray] = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<H", f.read(2))
            name = f.read(nlen).decode()
            (dlen,) = struct.unpack("<H", f.read(2))
            dtype = np.dtype(f.read(dlen).decode())
            (ndim,) = struct.unpack("<B", f.read(1))
            shape = tuple(struct.unpack("<Q", f.read(8))[0] for _ in range(ndim))
            n = int(np.prod(shape)) if shape else 1
            arrays[name] = np.frombuffer(f.read(n * dtype.itemsize), dtype=dtype).reshape(shape).copy()
    meta = {}
    if "__meta__" in arrays:
        meta = json.loads(arrays.pop("__meta__").tobytes().decode())
    return arrays, meta
