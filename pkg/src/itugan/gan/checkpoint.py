"""Versioned binary checkpoint container.

Layout (all integers little-endian):

    magic        4 bytes  b"ITUG"
    version      u32
    config hash  32 bytes sha256 of the canonical config JSON
    step         u64
    config       u32 length + UTF-8 JSON
    meta         u32 length + UTF-8 JSON (RNG states, optimizer step counts)
    blocks       u32 count, then per block:
                   u16 name length + UTF-8 name
                   u8 dtype code (0 = float64, 1 = float32)
                   u8 ndim, ndim x u32 dims
                   u64 byte length + raw little-endian array data
    trailer      32 bytes sha256 of everything above
"""
from __future__ import annotations

import hashlib
import io
import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"ITUG"
VERSION = 1
_DTYPES = {0: np.dtype("<f8"), 1: np.dtype("<f4")}
_CODES = {np.dtype("float64"): 0, np.dtype("float32"): 1}


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    config: dict
    step: int
    blocks: dict[str, np.ndarray] = field(repr=False)
    meta: dict = field(default_factory=dict)
    version: int = VERSION

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(_canonical(self.config).encode()).hexdigest()


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def encode(ckpt: Checkpoint) -> bytes:
    buf = io.BytesIO()
    cfg = _canonical(ckpt.config).encode()
    meta = _canonical(ckpt.meta).encode()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    buf.write(hashlib.sha256(cfg).digest())
    buf.write(struct.pack("<Q", ckpt.step))
    buf.write(struct.pack("<I", len(cfg)) + cfg)
    buf.write(struct.pack("<I", len(meta)) + meta)
    buf.write(struct.pack("<I", len(ckpt.blocks)))
    for name, arr in ckpt.blocks.items():
        arr = np.asarray(arr)
        if arr.dtype not in _CODES:
            raise CheckpointError(f"block {name!r}: unsupported dtype {arr.dtype}")
        code = _CODES[arr.dtype]
        raw = np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes()
        nm = name.encode()
        buf.write(struct.pack("<H", len(nm)) + nm)
        buf.write(struct.pack("<BB", code, arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(struct.pack("<Q", len(raw)) + raw)
    body = buf.getvalue()
    return body + hashlib.sha256(body).digest()


def save(ckpt: Checkpoint, path) -> Path:
    """Write atomically (temp file then rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(encode(ckpt))
    os.replace(tmp, path)
    return path


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.pos = data, 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError(f"truncated checkpoint reading {what} at offset {self.pos}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def decode(data: bytes, source: str = "<bytes>") -> Checkpoint:
    if data[:4] != MAGIC:
        raise CheckpointError(f"{source}: not a checkpoint (magic {data[:4]!r}, expected {MAGIC!r})")
    if len(data) < 8:
        raise CheckpointError(f"{source}: truncated header")
    (version,) = struct.unpack("<I", data[4:8])
    if version != VERSION:
        raise CheckpointError(f"{source}: checkpoint version {version}, this build reads version {VERSION}")
    stored_hash = data[8:40].hex()
    if len(data) < 40 + 32 or hashlib.sha256(data[:-32]).digest() != data[-32:]:
        raise CheckpointError(f"{source}: corrupt checkpoint (sha256 trailer mismatch; version {version}, config hash {stored_hash[:16]}...)")
    r = _Reader(data[:-32])
    r.pos = 40
    (step,) = r.unpack("<Q", "step")
    (n,) = r.unpack("<I", "config length")
    cfg_bytes = r.take(n, "config")
    if hashlib.sha256(cfg_bytes).hexdigest() != stored_hash:
        raise CheckpointError(f"{source}: config hash mismatch (version {version}, header {stored_hash[:16]}...)")
    (n,) = r.unpack("<I", "meta length")
    meta = json.loads(r.take(n, "meta"))
    (count,) = r.unpack("<I", "block count")
    blocks: dict[str, np.ndarray] = {}
    for _ in range(count):
        (n,) = r.unpack("<H", "block name length")
        name = r.take(n, "block name").decode()
        code, ndim = r.unpack("<BB", f"block {name} header")
        if code not in _DTYPES:
            raise CheckpointError(f"{source}: block {name!r} has unknown dtype code {code}")
        shape = r.unpack(f"<{ndim}I", f"block {name} dims")
        (nbytes,) = r.unpack("<Q", f"block {name} length")
        dt = _DTYPES[code]
        if nbytes != int(np.prod(shape, dtype=np.int64)) * dt.itemsize:
            raise CheckpointError(f"{source}: block {name!r} length {nbytes} does not match shape {shape}")
        blocks[name] = np.frombuffer(r.take(nbytes, f"block {name} data"), dtype=dt).reshape(shape).astype(dt.newbyteorder("="))
    if r.pos != len(r.data):
        raise CheckpointError(f"{source}: {len(r.data) - r.pos} unexpected bytes after the last block")
    return Checkpoint(json.loads(cfg_bytes), step, blocks, meta, version)


def load(path) -> Checkpoint:
    path = Path(path)
    return decode(path.read_bytes(), str(path))
