import numpy as np
import pytest

from envinfer.idx import RawDataset


@pytest.fixture
def random_raw():
    """Small random RawDataset factory (28x28 images, digits 0-9)."""

    def make(n=200, seed=0):
        gen = np.random.default_rng(seed)
        images = gen.random((n, 28, 28))
        digits = gen.integers(0, 10, size=n)
        return RawDataset(images=images, digit_labels=digits, split_tag="train")

    return make
