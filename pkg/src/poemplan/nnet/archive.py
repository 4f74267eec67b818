"""Versioned binary container for named tensors plus a JSON metadata block.

Layout (all integers little-endian):

    magic "NTAR" | version u32 | scalar_width u8 | tensor_count u32
    meta_len u32 | meta JSON (utf-8, sorted keys)
    per tensor:  name_len u16 | name utf-8 | rank u8 | dims u32... | raw data

Tensors are written sorted by name and data is row-major little-endian, so
identical contents always produce identical bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"NTAR"
FORMAT_VERSION = 1


class ArchiveError(Exception):
    """Corrupt or unreadable archive."""


class ArchiveVersionError(ArchiveError):
    """Archive written by an incompatible format version."""


def _dtype(scalar_width: int):
    if scalar_width == 8:
        return np.dtype("<f8")
    if scalar_width == 4:
        return np.dtype("<f4")
    raise ArchiveError(f"unsupported scalar width {scalar_width}")


def save_archive(path, tensors: dict[str, np.ndarray], meta: dict,
                 scalar_width: int = 8) -> None:
    dtype = _dtype(scalar_width)
    meta_bytes = json.dumps(meta, ensure_ascii=False, sort_keys=True,
                            separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IBI", FORMAT_VERSION, scalar_width, len(tensors)))
        fh.write(struct.pack("<I", len(meta_bytes)))
        fh.write(meta_bytes)
        for name in sorted(tensors):
            arr = np.ascontiguousarray(tensors[name], dtype=dtype)
            name_bytes = name.encode("utf-8")
            fh.write(struct.pack("<H", len(name_bytes)))
            fh.write(name_bytes)
            fh.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(arr.tobytes())


def load_archive(path) -> tuple[dict[str, np.ndarray], dict, int]:
    """Returns (tensors, meta, scalar_width); raises ArchiveError when corrupt."""
    blob = Path(path).read_bytes()
    view = memoryview(blob)
    off = 0

    def take(n: int) -> memoryview:
        nonlocal off
        if off + n > len(view):
            raise ArchiveError(f"corrupt archive: truncated at byte {off}")
        chunk = view[off:off + n]
        off += n
        return chunk

    if bytes(take(4)) != MAGIC:
        raise ArchiveError("corrupt archive: bad magic")
    version, scalar_width, count = struct.unpack("<IBI", take(9))
    if version != FORMAT_VERSION:
        raise ArchiveVersionError(f"format version {version}, expected {FORMAT_VERSION}")
    dtype = _dtype(scalar_width)
    (meta_len,) = struct.unpack("<I", take(4))
    try:
        meta = json.loads(bytes(take(meta_len)).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ArchiveError(f"corrupt archive: bad metadata ({exc})") from exc

    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = bytes(take(name_len)).decode("utf-8")
        (rank,) = struct.unpack("<B", take(1))
        shape = tuple(struct.unpack("<I", take(4))[0] for _ in range(rank))
        n_items = 1
        for dim in shape:
            n_items *= dim
        data = np.frombuffer(take(n_items * dtype.itemsize), dtype=dtype).reshape(shape)
        tensors[name] = data.copy()
    if off != len(view):
        raise ArchiveError(f"corrupt archive: {len(view) - off} trailing bytes")
    return tensors, meta, scalar_width
