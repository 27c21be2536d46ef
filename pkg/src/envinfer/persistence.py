"""Versioned binary artifact container with integrity checking.

Layout (little-endian): 4-byte kind magic, u32 format version, u64 FNV-1a
hash of the payload, u64 upstream-config hash, u64 payload length, payload.
Writes are atomic (temp file + rename).
"""

import os
import struct

from .errors import CorruptPayload, UnsupportedVersion, WrongKind

VERSION = 1

MAGIC = {
    "checkpoint": b"ENCK",
    "dataset": b"ENDS",
    "embeddings": b"ENEM",
    "clusters": b"ENCL",
    "blob": b"ENBL",
}

_HEADER = struct.Struct("<4sIQQQ")

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def save_artifact(kind: str, payload: bytes, path: str, upstream_hash: int = 0) -> None:
    header = _HEADER.pack(MAGIC[kind], VERSION, fnv1a64(payload),
                          upstream_hash, len(payload))
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(payload)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def load_artifact(kind: str, path: str) -> bytes:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise CorruptPayload(f"{path}: shorter than the header")
    magic, version, payload_hash, _upstream, length = _HEADER.unpack(data[: _HEADER.size])
    if magic != MAGIC[kind]:
        raise WrongKind(f"{path}: magic {magic!r}, expected {MAGIC[kind]!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"{path}: version {version}")
    payload = data[_HEADER.size :]
    if len(payload) != length or fnv1a64(payload) != payload_hash:
        raise CorruptPayload(f"{path}: payload hash mismatch")
    return payload


def read_upstream_hash(path: str) -> int:
    with open(path, "rb") as fh:
        data = fh.read(_HEADER.size)
    if len(data) < _HEADER.size:
        raise CorruptPayload(f"{path}: shorter than the header")
    return _HEADER.unpack(data)[3]
