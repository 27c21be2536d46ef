"""Deterministic synthetic handwritten-digit source in MNIST IDX format.

Real MNIST cannot be downloaded in offline environments, so this module
fabricates an arbitrarily large MNIST-like corpus from the 1797 bundled
scikit-learn 8x8 digits: upsample to 32x32, apply a random rotation, shift
and pixel noise, crop to 28x28 and quantize.  Output files are genuine
gzipped IDX files, so the rest of the pipeline treats them exactly like the
official dataset.  Everything is reproducible from (seed, size) alone.
"""

import gzip
import os
import struct
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from sklearn.datasets import load_digits

from . import rng
from .idx import IDX1_MAGIC, IDX3_MAGIC, IMAGE_FILES, LABEL_FILES

# Source pool is split so train/test never share a source glyph.
TRAIN_POOL = 1200


@dataclass
class GlyphConfig:
    max_shift: int = 1
    max_rotate_deg: float = 3.0
    noise_sigma: float = 0.02
    blur_sigma_max: float = 0.0
    upsample: str = "cubic"  # "cubic" (smooth strokes) or "kron" (blocky)


def _render(glyph: np.ndarray, gen: np.random.Generator, cfg: GlyphConfig) -> np.ndarray:
    if cfg.upsample == "kron":
        big = np.kron(glyph, np.ones((4, 4)))  # 8x8 -> 32x32
    else:
        big = np.clip(ndimage.zoom(glyph, 4.0, order=3, mode="nearest"), 0.0, 1.0)
    angle = gen.uniform(-cfg.max_rotate_deg, cfg.max_rotate_deg)
    big = ndimage.rotate(big, angle, reshape=False, order=1, mode="constant")
    if cfg.blur_sigma_max > 0:
        blur = gen.uniform(0.0, cfg.blur_sigma_max)
        if blur > 0.05:
            big = ndimage.gaussian_filter(big, blur)
    dy = gen.integers(-cfg.max_shift, cfg.max_shift + 1)
    dx = gen.integers(-cfg.max_shift, cfg.max_shift + 1)
    top = int(np.clip(2 + dy, 0, 4))
    left = int(np.clip(2 + dx, 0, 4))
    img = big[top : top + 28, left : left + 28]
    img = img + gen.normal(0.0, cfg.noise_sigma, size=img.shape)
    return np.clip(img, 0.0, 1.0)


def synth_split(n: int, split: str, seed: int, cfg: GlyphConfig | None = None):
    """Return (images uint8 (n,28,28), labels uint8 (n,)) for one split."""
    cfg = cfg or GlyphConfig()
    source = load_digits()
    glyphs = source.images / 16.0
    digits = source.target
    if split == "train":
        pool = np.arange(TRAIN_POOL)
    else:
        pool = np.arange(TRAIN_POOL, len(glyphs))
    gen = rng.stream(seed, f"syndigits:{split}")
    picks = gen.integers(0, len(pool), size=n)
    images = np.empty((n, 28, 28), dtype=np.uint8)
    labels = np.empty(n, dtype=np.uint8)
    for i, p in enumerate(picks):
        src = pool[p]
        images[i] = np.round(_render(glyphs[src], gen, cfg) * 255.0)
        labels[i] = digits[src]
    return images, labels


def write_idx_files(directory: str, n_train: int, n_test: int, seed: int,
                    cfg: GlyphConfig | None = None) -> None:
    """Write gzipped train/test IDX image+label files into directory."""
    os.makedirs(directory, exist_ok=True)
    for split, n in (("train", n_train), ("test", n_test)):
        images, labels = synth_split(n, split, seed, cfg)
        img_path = os.path.join(directory, IMAGE_FILES[split] + ".gz")
        with gzip.open(img_path, "wb") as fh:
            fh.write(struct.pack(">IIII", IDX3_MAGIC, n, 28, 28))
            fh.write(images.tobytes())
        lbl_path = os.path.join(directory, LABEL_FILES[split] + ".gz")
        with gzip.open(lbl_path, "wb") as fh:
            fh.write(struct.pack(">II", IDX1_MAGIC, n))
            fh.write(labels.tobytes())
