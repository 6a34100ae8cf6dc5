"""Checkpoint container: length-prefixed JSON header + float32 parameter blob.

Layout: a little-endian uint32 header length, the UTF-8 JSON header, then the
raw parameter blob (little-endian float32).  The header records layer widths,
activation, flags, the creating seed, and the exact byte count of the blob so
truncation is detected on read.  Composite artifacts (policies, twin critics)
store several networks back to back and describe each in ``nets``.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .core import Mlp


class CheckpointError(RuntimeError):
    pass


def save_nets(path, kind: str, nets: list[Mlp], extra: dict | None = None, seed=None) -> None:
    header = {
        "kind": kind,
        "seed": seed,
        "nets": [
            {
                "widths": net.widths,
                "activation": net.activation,
                "layer_norm": net.layer_norm,
                "dtype": net.dtype.name,
                "params": net.param_count(),
            }
            for net in nets
        ],
        "extra": extra or {},
    }
    blob = np.concatenate([net.get_flat() for net in nets]).astype("<f4").tobytes()
    header["blob_bytes"] = len(blob)
    raw = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<I", len(raw)))
        fh.write(raw)
        fh.write(blob)


def load_nets(path):
    """Read a checkpoint; returns (header dict, list of Mlp with float64 params)."""
    data = Path(path).read_bytes()
    if len(data) < 4:
        raise CheckpointError(f"{path}: file too short for header length")
    (hlen,) = struct.unpack("<I", data[:4])
    if len(data) < 4 + hlen:
        raise CheckpointError(f"{path}: truncated header (need {hlen} bytes at offset 4)")
    try:
        header = json.loads(data[4 : 4 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header: {exc}") from exc
    blob = data[4 + hlen :]
    expected = header.get("blob_bytes")
    if expected is None or len(blob) != expected:
        raise CheckpointError(
            f"{path}: blob length {len(blob)} != declared {expected} (offset {4 + hlen})"
        )
    flat = np.frombuffer(blob, dtype="<f4").astype(np.float64)
    nets = []
    i = 0
    for spec in header["nets"]:
        net = Mlp(spec["widths"], spec["activation"], spec["layer_norm"],
                  rng=np.random.default_rng(0), dtype=spec.get("dtype", "float64"))
        n = net.param_count()
        if i + n > flat.size:
            raise CheckpointError(f"{path}: blob too small for declared networks")
        net.set_flat(flat[i : i + n])
        i += n
        nets.append(net)
    if i != flat.size:
        raise CheckpointError(f"{path}: {flat.size - i} unused parameters in blob")
    return header, nets
