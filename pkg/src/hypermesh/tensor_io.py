"""Binary tensor files and JSON-manifest checkpoints.

File layout: 8-byte magic ``GYMTENSR``, u32 rank, u32 dims[rank], then
little-endian float64 payload in row-major order. Round-trips are
bit-exact.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ContractError

MAGIC = b"GYMTENSR"


def save_tensor(path: str | Path, array: np.ndarray) -> None:
    arr = np.ascontiguousarray(array, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(arr.tobytes())


def load_tensor(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise ContractError(f"{path}: bad magic {magic!r}")
        (rank,) = struct.unpack("<I", fh.read(4))
        shape = struct.unpack(f"<{rank}I", fh.read(4 * rank))
        count = int(np.prod(shape)) if rank else 1
        payload = fh.read(8 * count)
        if len(payload) != 8 * count:
            raise ContractError(f"{path}: truncated payload")
        return np.frombuffer(payload, dtype="<f8").reshape(shape).copy()


def save_checkpoint(directory: str | Path, params: dict[str, np.ndarray]) -> Path:
    """Write one binary file per parameter plus a JSON manifest; returns manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {}
    for name in sorted(params):
        fname = name.replace("/", "_").replace(".", "_") + ".gymt"
        save_tensor(directory / fname, params[name])
        manifest[name] = {"file": fname, "shape": list(params[name].shape)}
    mpath = directory / "manifest.json"
    with open(mpath, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return mpath


def load_checkpoint(manifest_path: str | Path) -> dict[str, np.ndarray]:
    manifest_path = Path(manifest_path)
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    out = {}
    for name, entry in manifest.items():
        arr = load_tensor(manifest_path.parent / entry["file"])
        if list(arr.shape) != entry["shape"]:
            raise ContractError(f"checkpoint entry {name}: shape mismatch")
        out[name] = arr
    return out
