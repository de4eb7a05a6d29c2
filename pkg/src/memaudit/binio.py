"""Versioned single-file container: magic line, JSON header, raw arrays.

Layout::

    <magic>\\n
    <8-byte little-endian header length><header JSON, UTF-8, sorted keys>
    <array bytes, concatenated in header order>

Writing is byte-deterministic for identical inputs.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np


class FormatError(ValueError):
    pass


def write_container(path, magic: str, version: int, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    entries = []
    blobs = []
    offset = 0
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        data = arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes()
        entries.append({"name": name, "dtype": arr.dtype.str.replace(">", "<"), "shape": list(arr.shape),
                        "offset": offset, "nbytes": len(data)})
        blobs.append(data)
        offset += len(data)
    header = {"format_version": version, "meta": meta, "arrays": entries}
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(magic.encode("ascii") + b"\n")
        fh.write(struct.pack("<Q", len(hbytes)))
        fh.write(hbytes)
        for b in blobs:
            fh.write(b)


def read_container(path, magic: str, version: int) -> tuple[dict, dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    head = magic.encode("ascii") + b"\n"
    if not raw.startswith(head):
        raise FormatError(f"{path}: not a {magic} file")
    pos = len(head)
    (hlen,) = struct.unpack("<Q", raw[pos : pos + 8])
    pos += 8
    header = json.loads(raw[pos : pos + hlen].decode("utf-8"))
    pos += hlen
    if header.get("format_version") != version:
        raise FormatError(f"{path}: format version {header.get('format_version')} != {version}")
    arrays = {}
    for e in header["arrays"]:
        start = pos + e["offset"]
        buf = raw[start : start + e["nbytes"]]
        arrays[e["name"]] = np.frombuffer(buf, dtype=np.dtype(e["dtype"])).reshape(e["shape"]).copy()
    return header["meta"], arrays
