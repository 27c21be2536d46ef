import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from envinfer import colored, rng
from envinfer.colored import SynthesisConfig
from envinfer.errors import EmptyDataset
from envinfer.idx import RawDataset


def test_binarize_boundaries():
    assert colored.binarize_label(3) == 1
    assert colored.binarize_label(4) == 1
    assert colored.binarize_label(7) == 0
    assert [colored.binarize_label(d) for d in range(10)] == [1] * 5 + [0] * 5


class TestFlip:
    def test_p_zero_identity(self):
        gen = rng.stream(0, "t")
        assert all(colored.flip_with_probability(1, 0.0, gen) == 1 for _ in range(100))

    def test_p_one_certain_flip(self):
        gen = rng.stream(0, "t")
        assert all(colored.flip_with_probability(1, 1.0, gen) == 0 for _ in range(100))

    def test_monte_carlo_rate(self):
        gen = rng.stream(123, "mc")
        flips = sum(colored.flip_with_probability(0, 0.25, gen) for _ in range(100_000))
        assert abs(flips / 100_000 - 0.25) < 0.01

    def test_consumes_one_draw(self):
        # N scalar flips see the same uniforms as one vectorized batch draw
        gen_a = rng.stream(7, "d")
        bits = [colored.flip_with_probability(0, 0.5, gen_a) for _ in range(64)]
        gen_b = rng.stream(7, "d")
        expected = (gen_b.random(64) < 0.5).astype(int).tolist()
        assert bits == expected


class TestDownsample:
    def test_constant_preserved(self):
        np.testing.assert_allclose(colored.downsample(np.full((28, 28), 0.3)), 0.3)

    def test_block_mean(self):
        img = np.zeros((2, 2))
        img[:] = [[0.1, 0.2], [0.3, 0.4]]
        np.testing.assert_allclose(colored.downsample(img), [[0.25]])

    def test_output_shape(self):
        assert colored.downsample(np.zeros((28, 28))).shape == (14, 14)


class TestColorize:
    def test_red(self):
        img = np.random.default_rng(0).random((14, 14))
        out = colored.colorize(img, 0)
        np.testing.assert_array_equal(out[0], img)
        assert not out[1].any()

    def test_green(self):
        img = np.random.default_rng(0).random((14, 14))
        out = colored.colorize(img, 1)
        np.testing.assert_array_equal(out[1], img)
        assert not out[0].any()

    @given(st.integers(0, 1), st.integers(0, 2**31))
    @settings(max_examples=20, deadline=None)
    def test_channel_sum_conserved(self, z, seed):
        img = np.random.default_rng(seed).random((14, 14))
        np.testing.assert_allclose(colored.colorize(img, z).sum(axis=0), img)


class TestSynthesize:
    def test_empirical_rates_at_scale(self, random_raw):
        raw = random_raw(n=60_000, seed=1)
        ds = colored.synthesize(raw, SynthesisConfig(0.25, 0.15, seed=5))
        stats = colored.correlation_stats(ds)
        assert abs(stats["empirical_pe"] - 0.15) < 0.01
        assert abs(stats["empirical_ny"] - 0.25) < 0.01

    def test_inverse_correlation_testset(self, random_raw):
        raw = random_raw(n=10_000, seed=2)
        ds = colored.synthesize(raw, SynthesisConfig(0.25, 0.9, seed=6))
        assert abs(colored.correlation_stats(ds)["empirical_pe"] - 0.9) < 0.015

    def test_binomial_concentration_three_sigma(self, random_raw):
        n = 60_000
        raw = random_raw(n=n, seed=3)
        for pe in (0.1, 0.5, 0.9):
            ds = colored.synthesize(raw, SynthesisConfig(0.25, pe, seed=11))
            sigma = np.sqrt(pe * (1 - pe) / n)
            assert abs(colored.correlation_stats(ds)["empirical_pe"] - pe) < 3 * sigma

    def test_determinism(self, random_raw):
        raw = random_raw(n=500)
        cfg = SynthesisConfig(0.25, 0.15, seed=42)
        a = colored.synthesize(raw, cfg)
        b = colored.synthesize(raw, cfg)
        np.testing.assert_array_equal(a.images, b.images)
        np.testing.assert_array_equal(a.labels, b.labels)
        np.testing.assert_array_equal(a.color_ids, b.color_ids)

    def test_exactly_one_channel_zero(self, random_raw):
        ds = colored.synthesize(random_raw(n=300), SynthesisConfig(0.25, 0.15, seed=0))
        per_channel = ds.images.reshape(len(ds), 2, -1).sum(axis=2)
        zeroed = (per_channel == 0).sum(axis=1)
        assert (zeroed == 1).all()

    def test_grayscale_channels_identical(self, random_raw):
        ds = colored.synthesize(random_raw(n=300),
                                SynthesisConfig(0.25, 0.15, seed=0, grayscale=True))
        np.testing.assert_array_equal(ds.images[:, 0], ds.images[:, 1])
        # grayscale never zeroes a channel (images here are random, all positive)
        assert (ds.images.reshape(len(ds), 2, -1).sum(axis=2) > 0).all()

    def test_colorization_matches_recorded_z(self, random_raw):
        ds = colored.synthesize(random_raw(n=200), SynthesisConfig(0.25, 0.15, seed=0))
        chan = ds.images.reshape(len(ds), 2, -1).sum(axis=2).argmax(axis=1)
        np.testing.assert_array_equal(chan, ds.color_ids)

    def test_draw_order_matches_scalar_recipe(self, random_raw):
        # noise flips for all i ascending, then color flips for all i ascending
        raw = random_raw(n=100)
        cfg = SynthesisConfig(0.3, 0.2, seed=9)
        ds = colored.synthesize(raw, cfg)
        gen = rng.stream(cfg.seed, "synthesis")
        clean = (raw.digit_labels <= 4).astype(int)
        y = [colored.flip_with_probability(c, cfg.noise_level, gen) for c in clean]
        z = [colored.flip_with_probability(b, cfg.color_correlation, gen) for b in y]
        np.testing.assert_array_equal(ds.labels, y)
        np.testing.assert_array_equal(ds.color_ids, z)


class TestStats:
    def test_pe_zero(self, random_raw):
        ds = colored.synthesize(random_raw(n=2), SynthesisConfig(0, 0, seed=0))
        assert colored.correlation_stats(ds)["empirical_pe"] == 0.0

    def test_pe_one(self, random_raw):
        ds = colored.synthesize(random_raw(n=2), SynthesisConfig(0, 1, seed=0))
        assert colored.correlation_stats(ds)["empirical_pe"] == 1.0

    def test_empty_dataset(self, random_raw):
        ds = colored.synthesize(random_raw(n=4), SynthesisConfig(0, 0, seed=0))
        with pytest.raises(EmptyDataset):
            colored.correlation_stats(ds.subset(np.array([], dtype=int)))


def test_codec_round_trip(random_raw):
    ds = colored.synthesize(random_raw(n=64), SynthesisConfig(0.25, 0.15, seed=3))
    restored = colored.decode_dataset(colored.encode_dataset(ds))
    np.testing.assert_array_equal(restored.images, ds.images)
    np.testing.assert_array_equal(restored.labels, ds.labels)
    np.testing.assert_array_equal(restored.color_ids, ds.color_ids)
    np.testing.assert_array_equal(restored.clean_labels, ds.clean_labels)
    np.testing.assert_array_equal(restored.digit_labels, ds.digit_labels)
    np.testing.assert_array_equal(restored.source_index, ds.source_index)
    assert restored.config == ds.config
