"""Color-correlated binary digit dataset synthesis.

Three-step recipe: binarize the digit label (0-4 -> 1, 5-9 -> 0), flip it
with the noise probability n_y, then flip again with probability p_e to get
the color id z.  Images are 2x2 mean-pooled to 14x14 and written into the
red (z=0) or green (z=1) channel of a 2-channel tensor; grayscale mode puts
the image in both channels and still records z.

RNG draw order is fixed: one uniform per instance for the noise flips
(ascending index), then one per instance for the color flips.  This makes
every dataset reproducible from (seed, config) alone.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import EmptyDataset
from .idx import RawDataset


@dataclass(frozen=True)
class SynthesisConfig:
    noise_level: float = 0.25
    color_correlation: float = 0.15
    seed: int = 0
    grayscale: bool = False
    downsample: bool = True

    def __post_init__(self):
        if not (0.0 <= self.noise_level <= 1.0 and 0.0 <= self.color_correlation <= 1.0):
            raise ValueError("noise_level and color_correlation must be in [0,1]")


@dataclass
class ColoredDataset:
    images: np.ndarray          # (N, 2, H, W) float32 in [0,1]
    labels: np.ndarray          # y, (N,) uint8
    color_ids: np.ndarray       # z, (N,) uint8
    clean_labels: np.ndarray    # pre-noise binary label, (N,) uint8
    digit_labels: np.ndarray    # (N,) int64
    source_index: np.ndarray    # (N,) int64, index into the RawDataset
    config: SynthesisConfig = field(default=SynthesisConfig())

    def __len__(self):
        return len(self.labels)

    def flat_images(self) -> np.ndarray:
        """(N, 2*H*W) float64 view for the network, channel-major."""
        return self.images.reshape(len(self), -1).astype(np.float64)

    def subset(self, indices: np.ndarray) -> "ColoredDataset":
        idx = np.asarray(indices)
        return ColoredDataset(
            images=self.images[idx],
            labels=self.labels[idx],
            color_ids=self.color_ids[idx],
            clean_labels=self.clean_labels[idx],
            digit_labels=self.digit_labels[idx],
            source_index=self.source_index[idx],
            config=self.config,
        )


def binarize_label(digit: int) -> int:
    return 1 if digit <= 4 else 0


def flip_with_probability(bit: int, p: float, gen: np.random.Generator) -> int:
    """Flip bit with probability p; consumes exactly one uniform draw."""
    return 1 - bit if gen.random() < p else bit


def downsample(image: np.ndarray) -> np.ndarray:
    """2x2 mean pooling, 28x28 -> 14x14 (works for any even shape)."""
    r, c = image.shape
    return image.reshape(r // 2, 2, c // 2, 2).mean(axis=(1, 3))


def colorize(image: np.ndarray, color_id: int) -> np.ndarray:
    """Put the image in channel color_id (0=red, 1=green), zero the other."""
    out = np.zeros((2,) + image.shape, dtype=image.dtype)
    out[color_id] = image
    return out


def synthesize(raw: RawDataset, config: SynthesisConfig) -> ColoredDataset:
    n = len(raw)
    if n == 0:
        raise EmptyDataset("cannot synthesize from an empty RawDataset")
    clean = (raw.digit_labels <= 4).astype(np.uint8)

    gen = rng.stream(config.seed, "synthesis")
    u_noise = gen.random(n)
    labels = np.where(u_noise < config.noise_level, 1 - clean, clean).astype(np.uint8)
    u_color = gen.random(n)
    color_ids = np.where(u_color < config.color_correlation, 1 - labels, labels).astype(np.uint8)

    if config.downsample:
        imgs = raw.images.reshape(n, 14, 2, 14, 2).mean(axis=(2, 4))
    else:
        imgs = raw.images
    h, w = imgs.shape[1:]
    images = np.zeros((n, 2, h, w), dtype=np.float32)
    if config.grayscale:
        images[:, 0] = imgs
        images[:, 1] = imgs
    else:
        rows = np.arange(n)
        images[rows, color_ids] = imgs.astype(np.float32)

    return ColoredDataset(
        images=images,
        labels=labels,
        color_ids=color_ids,
        clean_labels=clean,
        digit_labels=raw.digit_labels.copy(),
        source_index=np.arange(n, dtype=np.int64),
        config=config,
    )


def correlation_stats(dataset: ColoredDataset) -> dict:
    n = len(dataset)
    if n == 0:
        raise EmptyDataset("stats of an empty dataset")
    y = dataset.labels.astype(np.int64)
    z = dataset.color_ids.astype(np.int64)
    clean = dataset.clean_labels.astype(np.int64)
    return {
        "n": n,
        "class_balance": float(y.mean()),
        "empirical_pe": float((z != y).mean()),
        "empirical_ny": float((y != clean).mean()),
        "count_conflict": int((z != y).sum()),
    }


# --- binary cache codec (payload only; persistence adds the artifact header) ---

_CACHE_VERSION = 1


def encode_dataset(ds: ColoredDataset) -> bytes:
    n = len(ds)
    h, w = ds.images.shape[2:]
    cfg = ds.config
    head = struct.pack(
        "<IIIIddqB", _CACHE_VERSION, n, h, w,
        cfg.noise_level, cfg.color_correlation, cfg.seed, int(cfg.grayscale),
    )
    parts = [
        head,
        ds.images.astype(np.float32).tobytes(),
        ds.labels.astype(np.uint8).tobytes(),
        ds.color_ids.astype(np.uint8).tobytes(),
        ds.clean_labels.astype(np.uint8).tobytes(),
        ds.digit_labels.astype(np.int64).tobytes(),
        ds.source_index.astype(np.int64).tobytes(),
    ]
    return b"".join(parts)


def decode_dataset(data: bytes) -> ColoredDataset:
    head_size = struct.calcsize("<IIIIddqB")
    version, n, h, w, ny, pe, seed, gray = struct.unpack("<IIIIddqB", data[:head_size])
    if version != _CACHE_VERSION:
        raise ValueError(f"unknown dataset cache version {version}")
    off = head_size
    img_bytes = n * 2 * h * w * 4
    images = np.frombuffer(data, np.float32, count=n * 2 * h * w, offset=off).reshape(n, 2, h, w)
    off += img_bytes
    labels = np.frombuffer(data, np.uint8, count=n, offset=off).copy(); off += n
    color_ids = np.frombuffer(data, np.uint8, count=n, offset=off).copy(); off += n
    clean = np.frombuffer(data, np.uint8, count=n, offset=off).copy(); off += n
    digits = np.frombuffer(data, np.int64, count=n, offset=off).copy(); off += n * 8
    source = np.frombuffer(data, np.int64, count=n, offset=off).copy()
    cfg = SynthesisConfig(noise_level=ny, color_correlation=pe, seed=seed, grayscale=bool(gray))
    return ColoredDataset(images.copy(), labels, color_ids, clean, digits, source, cfg)
