"""Bit-exact parsing of MNIST IDX files plus a flat binary cache.

IDX integers are big-endian; our own cache format is little-endian.
Pixels are normalized to [0, 1] once, at parse time.
"""

import gzip
import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadMagic,
    CountMismatch,
    LabelOutOfRange,
    MissingFile,
    TrailingBytes,
    TruncatedPayload,
)

IDX3_MAGIC = 0x00000803
IDX1_MAGIC = 0x00000801

CACHE_VERSION = 1

IMAGE_FILES = {"train": "train-images-idx3-ubyte", "test": "t10k-images-idx3-ubyte"}
LABEL_FILES = {"train": "train-labels-idx1-ubyte", "test": "t10k-labels-idx1-ubyte"}


@dataclass
class RawDataset:
    """Paired grayscale images (N, R, C) in [0,1] and digit labels (N,)."""

    images: np.ndarray
    digit_labels: np.ndarray
    split_tag: str

    def __post_init__(self):
        if len(self.images) != len(self.digit_labels):
            raise CountMismatch(
                f"{len(self.images)} images vs {len(self.digit_labels)} labels"
            )

    def __len__(self):
        return len(self.images)


def parse_idx_images(data: bytes) -> np.ndarray:
    """Parse an IDX3 payload into an (N, R, C) float64 array scaled to [0,1]."""
    if len(data) < 16:
        raise TruncatedPayload(f"header needs 16 bytes, got {len(data)}")
    magic, n, rows, cols = struct.unpack(">IIII", data[:16])
    if magic != IDX3_MAGIC:
        raise BadMagic(f"expected {IDX3_MAGIC:#010x}, got {magic:#010x}")
    expected = 16 + n * rows * cols
    if len(data) < expected:
        raise TruncatedPayload(f"expected {expected} bytes, got {len(data)}")
    if len(data) > expected:
        raise TrailingBytes(f"expected {expected} bytes, got {len(data)}")
    pixels = np.frombuffer(data, dtype=np.uint8, offset=16)
    return pixels.reshape(n, rows, cols).astype(np.float64) / 255.0


def parse_idx_labels(data: bytes) -> np.ndarray:
    """Parse an IDX1 payload into an (N,) int64 array of digits 0-9."""
    if len(data) < 8:
        raise TruncatedPayload(f"header needs 8 bytes, got {len(data)}")
    magic, n = struct.unpack(">II", data[:8])
    if magic != IDX1_MAGIC:
        raise BadMagic(f"expected {IDX1_MAGIC:#010x}, got {magic:#010x}")
    expected = 8 + n
    if len(data) < expected:
        raise TruncatedPayload(f"expected {expected} bytes, got {len(data)}")
    if len(data) > expected:
        raise TrailingBytes(f"expected {expected} bytes, got {len(data)}")
    labels = np.frombuffer(data, dtype=np.uint8, offset=8).astype(np.int64)
    if labels.size and labels.max() > 9:
        raise LabelOutOfRange(f"label byte {labels.max()} > 9")
    return labels


def _read_maybe_gzip(path: str) -> bytes:
    for candidate in (path, path + ".gz"):
        if os.path.exists(candidate):
            if candidate.endswith(".gz"):
                with gzip.open(candidate, "rb") as fh:
                    return fh.read()
            with open(candidate, "rb") as fh:
                return fh.read()
    raise MissingFile(path)


def load_mnist(directory: str, split: str) -> RawDataset:
    """Load one split (train|test) from IDX files, gzipped or plain."""
    if split not in IMAGE_FILES:
        raise ValueError(f"split must be train|test, got {split!r}")
    images = parse_idx_images(_read_maybe_gzip(os.path.join(directory, IMAGE_FILES[split])))
    labels = parse_idx_labels(_read_maybe_gzip(os.path.join(directory, LABEL_FILES[split])))
    if len(images) != len(labels):
        raise CountMismatch(f"{len(images)} images vs {len(labels)} labels")
    return RawDataset(images=images, digit_labels=labels, split_tag=split)


def save_cache(dataset: RawDataset, path: str) -> None:
    """Write the flat cache: 16-byte header (version, N, R, C) + pixels + labels."""
    n, rows, cols = dataset.images.shape
    pixels = np.round(dataset.images * 255.0).astype(np.uint8)
    labels = dataset.digit_labels.astype(np.uint8)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(struct.pack("<IIII", CACHE_VERSION, n, rows, cols))
        fh.write(pixels.tobytes())
        fh.write(labels.tobytes())
    os.replace(tmp, path)


def load_cache(path: str, split_tag: str = "train") -> RawDataset:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 16:
        raise TruncatedPayload(path)
    version, n, rows, cols = struct.unpack("<IIII", data[:16])
    if version != CACHE_VERSION:
        raise TruncatedPayload(f"unknown cache version {version}")
    expected = 16 + n * rows * cols + n
    if len(data) != expected:
        raise TruncatedPayload(f"expected {expected} bytes, got {len(data)}")
    pixels = np.frombuffer(data, dtype=np.uint8, offset=16, count=n * rows * cols)
    labels = np.frombuffer(data, dtype=np.uint8, offset=16 + n * rows * cols).astype(np.int64)
    images = pixels.reshape(n, rows, cols).astype(np.float64) / 255.0
    return RawDataset(images=images, digit_labels=labels, split_tag=split_tag)
