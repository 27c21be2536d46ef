import numpy as np
import pytest

from envinfer import idx, syndigits


class TestSynthSplit:
    def test_shapes_and_ranges(self):
        images, labels = syndigits.synth_split(40, "train", seed=0)
        assert images.shape == (40, 28, 28) and images.dtype == np.uint8
        assert labels.shape == (40,) and labels.max() <= 9

    def test_deterministic(self):
        a = syndigits.synth_split(25, "train", seed=5)
        b = syndigits.synth_split(25, "train", seed=5)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_seed_changes_output(self):
        a, _ = syndigits.synth_split(25, "train", seed=5)
        b, _ = syndigits.synth_split(25, "train", seed=6)
        assert not np.array_equal(a, b)

    def test_splits_differ(self):
        a, _ = syndigits.synth_split(25, "train", seed=5)
        b, _ = syndigits.synth_split(25, "test", seed=5)
        assert not np.array_equal(a, b)

    def test_all_ten_digits_reachable(self):
        _, labels = syndigits.synth_split(400, "test", seed=1)
        assert set(labels.tolist()) == set(range(10))

    def test_images_not_blank(self):
        images, _ = syndigits.synth_split(10, "train", seed=0)
        assert (images.reshape(10, -1).max(axis=1) > 100).all()


def test_write_idx_files_round_trip(tmp_path):
    syndigits.write_idx_files(str(tmp_path), n_train=30, n_test=12, seed=0)
    train = idx.load_mnist(str(tmp_path), "train")
    test = idx.load_mnist(str(tmp_path), "test")
    assert len(train) == 30 and len(test) == 12
    assert train.images.shape == (30, 28, 28)
    assert 0.0 <= train.images.min() and train.images.max() <= 1.0
