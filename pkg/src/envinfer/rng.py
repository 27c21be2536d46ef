"""Named deterministic random streams.

Every source of randomness in the pipeline is a named stream derived from a
root seed and a string label ("synthesis", "init", "cluster", "envsample",
usually suffixed with the per-run seed).  The stream key is the first 128 bits
of SHA-256("<root_seed>:<label>") fed into the counter-based Philox generator,
so the same (root seed, label) pair yields bit-identical draws on any platform
while distinct labels give independent streams.
"""

import hashlib

import numpy as np


def stream_key(root_seed: int, label: str) -> int:
    digest = hashlib.sha256(f"{root_seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:16], "little")


def stream(root_seed: int, label: str) -> np.random.Generator:
    """Return the named deterministic generator for (root_seed, label)."""
    return np.random.Generator(np.random.Philox(key=stream_key(root_seed, label)))
