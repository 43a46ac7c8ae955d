"""Binary checkpoint container.

Layout: a magic line, one line of JSON header, then the raw little-endian
float64 buffers back to back in header order. No timestamps are written, so
save -> load -> save reproduces the file byte for byte.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import DataError
from .network import NetworkSpec, NetworkState

MAGIC = b"HARCNN-CKPT\n"
VERSION = 1


def save_checkpoint(path, spec: NetworkSpec, state: NetworkState, meta: dict | None = None) -> None:
    arrays = []
    blobs = []
    offset = 0
    for group, table in (("params", state.params), ("buffers", state.buffers)):
        for name in sorted(table):
            buf = np.ascontiguousarray(table[name], dtype="<f8").tobytes()
            arrays.append(
                {"group": group, "name": name, "shape": list(table[name].shape), "offset": offset}
            )
            blobs.append(buf)
            offset += len(buf)
    header = {
        "version": VERSION,
        "spec": spec.to_dict(),
        "seed": int(state.seed),
        "meta": meta or {},
        "arrays": arrays,
    }
    line = json.dumps(header, sort_keys=True, separators=(",", ":")).encode() + b"\n"
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(line)
        for b in blobs:
            fh.write(b)


def load_checkpoint(path) -> tuple[NetworkSpec, NetworkState, dict]:
    raw = Path(path).read_bytes()
    if not raw.startswith(MAGIC):
        raise DataError(f"{path}: not a harcnn checkpoint")
    nl = raw.index(b"\n", len(MAGIC))
    header = json.loads(raw[len(MAGIC) : nl])
    if header.get("version") != VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {header.get('version')}")
    payload = memoryview(raw)[nl + 1 :]
    params, buffers = {}, {}
    for entry in header["arrays"]:
        count = int(np.prod(entry["shape"], dtype=np.int64))
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=entry["offset"])
        arr = arr.reshape(entry["shape"]).astype(np.float64)
        (params if entry["group"] == "params" else buffers)[entry["name"]] = arr
    spec = NetworkSpec.from_dict(header["spec"])
    return spec, NetworkState(params, buffers, header["seed"]), header["meta"]
