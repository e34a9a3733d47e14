"""Binary tensor container used for generator and training-state checkpoints.

Layout: ``b"SGC1"``, u32 format version, u32 header length, a UTF-8 JSON
header (metadata plus a name/dtype/shape/offset table), then the raw
little-endian payloads in table order. Writing the same tensors and metadata
always produces the same bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any, Mapping

import numpy as np

MAGIC = b"SGC1"
VERSION = 1
_DTYPES = {"f4": np.dtype("<f4"), "f8": np.dtype("<f8"), "i8": np.dtype("<i8")}


class CheckpointError(ValueError):
    pass


def _code(arr: np.ndarray) -> str:
    for code, dt in _DTYPES.items():
        if arr.dtype == dt or arr.dtype == dt.newbyteorder("="):
            return code
    raise CheckpointError(f"unsupported dtype {arr.dtype}")


def dumps(tensors: Mapping[str, np.ndarray], meta: Mapping[str, Any] | None = None) -> bytes:
    table = []
    chunks = []
    offset = 0
    for name, value in tensors.items():
        arr = np.asarray(value, order="C")
        code = _code(arr)
        raw = arr.astype(_DTYPES[code], copy=False).tobytes()
        table.append({"name": name, "dtype": code, "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    header = json.dumps({"meta": dict(meta or {}), "tensors": table}, sort_keys=True, separators=(",", ":")).encode()
    return MAGIC + struct.pack("<II", VERSION, len(header)) + header + b"".join(chunks)


def loads(data: bytes) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    if len(data) < 12 or data[:4] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    version, hlen = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise CheckpointError(f"checkpoint format version {version}, this build reads version {VERSION}")
    try:
        header = json.loads(data[12 : 12 + hlen])
    except ValueError as err:
        raise CheckpointError("corrupt checkpoint header") from err
    base = 12 + hlen
    tensors = {}
    for entry in header["tensors"]:
        start = base + entry["offset"]
        raw = data[start : start + entry["nbytes"]]
        if len(raw) != entry["nbytes"]:
            raise CheckpointError(f"truncated payload for {entry['name']}")
        tensors[entry["name"]] = np.frombuffer(raw, dtype=_DTYPES[entry["dtype"]]).reshape(entry["shape"]).copy()
    return tensors, header["meta"]


def save(path: str | Path, tensors: Mapping[str, np.ndarray], meta: Mapping[str, Any] | None = None) -> None:
    Path(path).write_bytes(dumps(tensors, meta))


def load(path: str | Path) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    return loads(Path(path).read_bytes())
