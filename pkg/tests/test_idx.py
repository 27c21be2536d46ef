import gzip
import os
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from envinfer import idx
from envinfer.errors import (
    BadMagic,
    CountMismatch,
    LabelOutOfRange,
    MissingFile,
    TrailingBytes,
    TruncatedPayload,
)


def make_idx3(images):
    images = np.asarray(images, dtype=np.uint8)
    n, r, c = images.shape
    return struct.pack(">IIII", 0x00000803, n, r, c) + images.tobytes()


def make_idx1(labels):
    labels = np.asarray(labels, dtype=np.uint8)
    return struct.pack(">II", 0x00000801, len(labels)) + labels.tobytes()


class TestParseImages:
    def test_minimal_payload(self):
        data = make_idx3(np.array([[[0, 255], [0, 255]]]))
        images = idx.parse_idx_images(data)
        assert images.shape == (1, 2, 2)
        np.testing.assert_array_equal(images[0], [[0.0, 1.0], [0.0, 1.0]])

    def test_wrong_magic(self):
        data = struct.pack(">IIII", 0x00000801, 1, 2, 2) + bytes(4)
        with pytest.raises(BadMagic):
            idx.parse_idx_images(data)

    def test_official_train_file_size_arithmetic(self):
        # the published train-images file is 16 + 60000*784 bytes
        n, r, c = 60000, 28, 28
        header = struct.pack(">IIII", 0x00000803, n, r, c)
        data = header + bytes(n * r * c)
        assert len(data) == 47040016
        images = idx.parse_idx_images(data)
        assert images.shape == (60000, 28, 28)

    def test_truncated(self):
        data = make_idx3(np.zeros((2, 3, 3)))
        with pytest.raises(TruncatedPayload):
            idx.parse_idx_images(data[:-1])

    def test_trailing(self):
        data = make_idx3(np.zeros((2, 3, 3)))
        with pytest.raises(TrailingBytes):
            idx.parse_idx_images(data + b"\x00")

    def test_short_header(self):
        with pytest.raises(TruncatedPayload):
            idx.parse_idx_images(b"\x00\x00\x08\x03")

    @given(st.integers(min_value=0, max_value=16 + 4 * 2 * 2 - 1))
    @settings(max_examples=30, deadline=None)
    def test_any_truncation_errors(self, cut):
        data = make_idx3(np.zeros((4, 2, 2)))
        with pytest.raises((BadMagic, TruncatedPayload)):
            idx.parse_idx_images(data[:cut])


class TestParseLabels:
    def test_minimal_payload(self):
        np.testing.assert_array_equal(idx.parse_idx_labels(make_idx1([5, 0, 9])), [5, 0, 9])

    def test_label_out_of_range(self):
        with pytest.raises(LabelOutOfRange):
            idx.parse_idx_labels(make_idx1([1, 12]))

    def test_official_train_file_size_arithmetic(self):
        data = struct.pack(">II", 0x00000801, 60000) + bytes(60000)
        assert len(data) == 60008
        assert len(idx.parse_idx_labels(data)) == 60000

    def test_wrong_magic(self):
        with pytest.raises(BadMagic):
            idx.parse_idx_labels(struct.pack(">II", 0x00000803, 0))

    def test_trailing(self):
        with pytest.raises(TrailingBytes):
            idx.parse_idx_labels(make_idx1([1]) + b"\x00")


class TestLoadMnist:
    def write_split(self, directory, split, images, labels, gz=False):
        img_name = idx.IMAGE_FILES[split]
        lbl_name = idx.LABEL_FILES[split]
        opener = gzip.open if gz else open
        suffix = ".gz" if gz else ""
        with opener(os.path.join(directory, img_name + suffix), "wb") as fh:
            fh.write(make_idx3(images))
        with opener(os.path.join(directory, lbl_name + suffix), "wb") as fh:
            fh.write(make_idx1(labels))

    def test_paired_load(self, tmp_path):
        images = (np.arange(2 * 28 * 28) % 256).astype(np.uint8).reshape(2, 28, 28)
        self.write_split(tmp_path, "train", images, [3, 7])
        raw = idx.load_mnist(str(tmp_path), "train")
        assert len(raw) == 2
        np.testing.assert_array_equal(raw.digit_labels, [3, 7])
        np.testing.assert_allclose(raw.images, images / 255.0)

    def test_gzip_transparent(self, tmp_path):
        images = np.zeros((3, 28, 28), dtype=np.uint8)
        self.write_split(tmp_path, "test", images, [1, 2, 3], gz=True)
        raw = idx.load_mnist(str(tmp_path), "test")
        assert len(raw) == 3 and raw.split_tag == "test"

    def test_missing_label_file(self, tmp_path):
        images = np.zeros((1, 28, 28), dtype=np.uint8)
        with open(os.path.join(tmp_path, idx.IMAGE_FILES["train"]), "wb") as fh:
            fh.write(make_idx3(images))
        with pytest.raises(MissingFile):
            idx.load_mnist(str(tmp_path), "train")

    def test_count_mismatch(self, tmp_path):
        self.write_split(tmp_path, "train", np.zeros((2, 28, 28), dtype=np.uint8), [1])
        with pytest.raises(CountMismatch):
            idx.load_mnist(str(tmp_path), "train")


class TestCache:
    def test_round_trip_bit_identical(self, tmp_path, random_raw):
        raw = random_raw(n=50)
        # quantize as parse would have: cache stores raw bytes
        raw.images = np.round(raw.images * 255) / 255.0
        path = str(tmp_path / "cache.bin")
        idx.save_cache(raw, path)
        loaded = idx.load_cache(path)
        np.testing.assert_array_equal(loaded.images, raw.images)
        np.testing.assert_array_equal(loaded.digit_labels, raw.digit_labels)

    def test_truncated_cache(self, tmp_path, random_raw):
        path = str(tmp_path / "cache.bin")
        idx.save_cache(random_raw(n=5), path)
        with open(path, "rb") as fh:
            data = fh.read()
        with open(path, "wb") as fh:
            fh.write(data[:-3])
        with pytest.raises(TruncatedPayload):
            idx.load_cache(path)
