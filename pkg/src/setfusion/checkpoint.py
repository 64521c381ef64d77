"""Versioned binary checkpoint: a flat name -> float64 array map.

Values round-trip bitwise. The header is a JSON block carrying the
format tag plus run metadata (frozen flag, aggregator, config text).
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import DataFormatError

MAGIC = b"SFCK"
FORMAT_VERSION = 1
FORMAT_TAG = "setfusion-checkpoint"


def save_checkpoint(path, header: dict, arrays: dict[str, np.ndarray]) -> None:
    meta = dict(header)
    meta["format_tag"] = FORMAT_TAG
    meta["format_version"] = FORMAT_VERSION
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        blob = json.dumps(meta, sort_keys=True).encode("utf-8")
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<I", len(arrays)))
        for name in sorted(arrays):
            arr = np.ascontiguousarray(arrays[name], dtype="<f8")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(arr.tobytes())


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise DataFormatError(f"{path}: not a checkpoint (bad magic)")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != FORMAT_VERSION:
            raise DataFormatError(f"{path}: unsupported checkpoint version {version}")
        (blob_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(blob_len).decode("utf-8"))
        if header.get("format_tag") != FORMAT_TAG:
            raise DataFormatError(f"{path}: unexpected format tag {header.get('format_tag')!r}")
        (count,) = struct.unpack("<I", fh.read(4))
        arrays: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = tuple(struct.unpack("<I", fh.read(4))[0] for _ in range(ndim))
            size = int(np.prod(shape)) if shape else 1
            raw = fh.read(8 * size)
            if len(raw) != 8 * size:
                raise DataFormatError(f"{path}: truncated tensor record '{name}'")
            arrays[name] = np.frombuffer(raw, dtype="<f8").copy().reshape(shape)
    return header, arrays
