"""Binary parameter checkpoints.

Layout (little endian)::

    magic b"MFCK" | u32 version | u32 json length | config JSON (utf-8)
    | 64 bytes config sha256 hex | u64 parameter count | count x f64
    | 32 bytes sha256 of everything before it
"""
from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from ..errors import IncompatibleCheckpoint
from .config import ModelConfig
from .model import ParamLayout

MAGIC = b"MFCK"
VERSION = 1


def save_checkpoint(path, params, config):
    params = np.asarray(params, dtype="<f8")
    if params.shape != (ParamLayout(config).size,):
        raise IncompatibleCheckpoint(f"{params.size} parameters do not fit config layout")
    blob = json.dumps(config.to_dict(), sort_keys=True).encode()
    body = b"".join([
        MAGIC, struct.pack("<II", VERSION, len(blob)), blob, config.hash().encode(),
        struct.pack("<Q", params.size), params.tobytes(),
    ])
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(body + hashlib.sha256(body).digest())
    tmp.replace(path)
    return path


def load_checkpoint(path, expect=None):
    """Return ``(params, config)``; ``expect`` is an optional config the file must match."""
    raw = Path(path).read_bytes()
    if len(raw) < 12 + 64 + 8 + 32 or raw[:4] != MAGIC:
        raise IncompatibleCheckpoint(f"{path}: not a checkpoint or truncated")
    body, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise IncompatibleCheckpoint(f"{path}: checksum mismatch (truncated or corrupt)")
    version, n_json = struct.unpack_from("<II", body, 4)
    if version != VERSION:
        raise IncompatibleCheckpoint(f"{path}: checkpoint version {version}, expected {VERSION}")
    pos = 12
    cfg = ModelConfig.from_dict(json.loads(body[pos:pos + n_json]))
    pos += n_json
    stored_hash = body[pos:pos + 64].decode()
    pos += 64
    (count,) = struct.unpack_from("<Q", body, pos)
    pos += 8
    if stored_hash != cfg.hash():
        raise IncompatibleCheckpoint(f"{path}: config hash does not match stored config")
    if count != ParamLayout(cfg).size or len(body) - pos != 8 * count:
        raise IncompatibleCheckpoint(f"{path}: parameter count {count} inconsistent with config")
    if expect is not None and expect.hash() != stored_hash:
        raise IncompatibleCheckpoint(f"{path}: checkpoint config differs from the requested one")
    params = np.frombuffer(body, "<f8", count, pos).astype(np.float64)
    return params, cfg
