"""Binary cache for solved vertex tables.

Each cached array lives in its own file named by the SHA-256 of a canonical
description of everything it depends on (model parameters, lattice, mode,
solver identity).  The format is deliberately minimal and fully specified:

    magic   4 bytes  b"GAVX"
    version u32 LE   (currently 1)
    key     32 bytes SHA-256 of the canonical description
    ndim    u32 LE
    dims    ndim * u64 LE
    data    complex128 LE, C order

Loads verify magic, version and key before trusting the payload.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .model import ModelParams
from .numerics.grids import MomentumGrid

MAGIC = b"GAVX"
VERSION = 1


def cache_key(params: ModelParams, grid: MomentumGrid, mode: str,
              kind: str, extra: dict = None) -> str:
    """Canonical SHA-256 key for one solved table."""
    desc = {
        "kind": kind,
        "mode": mode,
        "model": {
            "gamma": params.gamma,
            "leg_separation": params.leg_separation,
            "carrier_phase": params.carrier_phase,
            "detuning": params.detuning,
            "gamma1_fraction": params.gamma1_fraction,
        },
        "grid": {"k_max": grid.k_max, "n_points": grid.n_points},
        "extra": extra or {},
    }
    blob = json.dumps(desc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def save_array(cache_dir, key: str, array: np.ndarray) -> Path:
    """Write one complex array under its key; atomic via rename."""
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    arr = np.ascontiguousarray(array, dtype=np.complex128)
    path = cache_dir / f"{key}.gavx"
    tmp = path.with_suffix(".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(bytes.fromhex(key))
        fh.write(struct.pack("<I", arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        fh.write(arr.astype("<c16").tobytes(order="C"))
    tmp.replace(path)
    return path


def load_array(cache_dir, key: str):
    """Load an array by key; returns None on miss or any mismatch."""
    path = Path(cache_dir) / f"{key}.gavx"
    if not path.exists():
        return None
    try:
        with open(path, "rb") as fh:
            if fh.read(4) != MAGIC:
                return None
            (version,) = struct.unpack("<I", fh.read(4))
            if version != VERSION:
                return None
            if fh.read(32).hex() != key:
                return None
            (ndim,) = struct.unpack("<I", fh.read(4))
            shape = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim))
            data = np.frombuffer(fh.read(), dtype="<c16")
        if data.size != int(np.prod(shape)):
            return None
        return data.reshape(shape).astype(np.complex128)
    except (OSError, struct.error, ValueError):
        return None
