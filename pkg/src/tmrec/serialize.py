"""Versioned binary container for model artifacts.

Layout (little-endian):

    bytes 0..3    magic ``TMRC``
    bytes 4..7    container version (uint32)
    bytes 8..11   header length H (uint32)
    bytes 12..    H bytes of UTF-8 JSON header
    rest          raw array bytes, C-order, concatenated in header order

Header JSON: ``{"kind": <model kind tag>, "config": {...},
"arrays": [{"name", "dtype", "shape"}, ...]}``.  The header is written
with sorted keys and compact separators so identical models serialize to
identical bytes.
"""

from __future__ import annotations

import json

import numpy as np

from .exceptions import FormatError

MAGIC = b"TMRC"
CONTAINER_VERSION = 1

_ALLOWED_DTYPES = {"<i2", "<i4", "<i8", "<u8", "|u1", "<f8"}


def dump_container(kind: str, config: dict, arrays: dict[str, np.ndarray]) -> bytes:
    entries = []
    blobs = []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        dtype = arr.dtype.newbyteorder("<") if arr.dtype.byteorder == ">" else arr.dtype
        arr = arr.astype(dtype, copy=False)
        if arr.dtype.str not in _ALLOWED_DTYPES:
            raise FormatError(f"unsupported array dtype {arr.dtype.str!r} for {name!r}")
        entries.append({"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape)})
        blobs.append(arr.tobytes())
    header = json.dumps(
        {"kind": kind, "config": config, "arrays": entries},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    head = MAGIC + np.uint32(CONTAINER_VERSION).tobytes() + np.uint32(len(header)).tobytes()
    return head + header + b"".join(blobs)


def load_container(data: bytes) -> tuple[str, dict, dict[str, np.ndarray]]:
    if len(data) < 12 or data[:4] != MAGIC:
        raise FormatError("not a model container (bad magic)")
    version = int(np.frombuffer(data[4:8], dtype="<u4")[0])
    if version != CONTAINER_VERSION:
        raise FormatError(f"unsupported container version {version}")
    header_len = int(np.frombuffer(data[8:12], dtype="<u4")[0])
    if len(data) < 12 + header_len:
        raise FormatError("truncated container header")
    try:
        header = json.loads(data[12 : 12 + header_len].decode("utf-8"))
        kind = header["kind"]
        config = header["config"]
        entries = header["arrays"]
    except (ValueError, KeyError, UnicodeDecodeError) as exc:
        raise FormatError(f"corrupt container header: {exc}") from exc

    arrays: dict[str, np.ndarray] = {}
    offset = 12 + header_len
    for entry in entries:
        try:
            dtype = np.dtype(entry["dtype"])
            shape = tuple(int(s) for s in entry["shape"])
            name = entry["name"]
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"corrupt array entry: {exc}") from exc
        if entry["dtype"] not in _ALLOWED_DTYPES:
            raise FormatError(f"unsupported array dtype {entry['dtype']!r}")
        nbytes = dtype.itemsize * int(np.prod(shape, dtype=np.int64)) if shape else dtype.itemsize
        if len(data) < offset + nbytes:
            raise FormatError(f"truncated array data for {name!r}")
        arrays[name] = np.frombuffer(data[offset : offset + nbytes], dtype=dtype).reshape(shape).copy()
        offset += nbytes
    if offset != len(data):
        raise FormatError(f"{len(data) - offset} trailing bytes after arrays")
    return kind, config, arrays


def save_container(path, kind: str, config: dict, arrays: dict[str, np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(dump_container(kind, config, arrays))


def read_container(path) -> tuple[str, dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        return load_container(fh.read())
