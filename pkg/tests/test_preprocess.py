import numpy as np
import pytest
from PIL import Image

from crossfp.errors import (
    EmptyForegroundError,
    ImageTooSmallError,
    UnsupportedFormatError,
    ZeroVarianceError,
)
from crossfp.preprocess import (
    GrayImage,
    load_image,
    normalize,
    read_pgm,
    segment,
    write_pgm,
)


def random_image(rng, height=64, width=64):
    return GrayImage(rng.integers(0, 256, size=(height, width)).astype(np.float64))


class TestPgmIO:
    def test_binary_round_trip_is_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        img = random_image(rng, 37, 52)
        path = tmp_path / "img.pgm"
        write_pgm(img, path)
        back = read_pgm(path)
        assert np.array_equal(back.pixels, img.pixels)

    def test_ascii_pgm_with_comments(self, tmp_path):
        path = tmp_path / "ascii.pgm"
        path.write_bytes(b"P2\n# a comment\n3 2\n255\n0 10 20\n30 40 255\n")
        img = read_pgm(path)
        assert img.pixels.shape == (2, 3)
        assert img.pixels[1, 2] == 255

    def test_binary_header_with_comment(self, tmp_path):
        path = tmp_path / "c.pgm"
        raster = bytes(range(6))
        path.write_bytes(b"P5 # wid ht\n3 2 255\n" + raster)
        img = read_pgm(path)
        assert np.array_equal(img.pixels.ravel(), np.arange(6))

    def test_rejects_wide_maxval(self, tmp_path):
        path = tmp_path / "deep.pgm"
        path.write_bytes(b"P5\n2 2\n65535\n" + b"\x00" * 8)
        with pytest.raises(UnsupportedFormatError):
            read_pgm(path)

    def test_rejects_truncated_raster(self, tmp_path):
        path = tmp_path / "short.pgm"
        path.write_bytes(b"P5\n4 4\n255\n" + b"\x00" * 7)
        with pytest.raises(UnsupportedFormatError):
            read_pgm(path)


class TestLoadImage:
    def test_png_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        raster = rng.integers(0, 256, size=(64, 80), dtype=np.uint8)
        path = tmp_path / "img.png"
        Image.fromarray(raster, mode="L").save(path)
        img = load_image(path)
        assert np.array_equal(img.pixels, raster)

    def test_rejects_color_png(self, tmp_path):
        raster = np.zeros((64, 64, 3), dtype=np.uint8)
        path = tmp_path / "rgb.png"
        Image.fromarray(raster, mode="RGB").save(path)
        with pytest.raises(UnsupportedFormatError):
            load_image(path)

    def test_small_image_rejected_by_default(self, tmp_path):
        path = tmp_path / "tiny.pgm"
        write_pgm(np.zeros((32, 32)), path)
        with pytest.raises(ImageTooSmallError):
            load_image(path)

    def test_small_image_allowed_with_override(self, tmp_path):
        path = tmp_path / "tiny.pgm"
        write_pgm(np.arange(4).reshape(2, 2), path)
        img = load_image(path, min_size=None)
        assert img.pixels.shape == (2, 2)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_image(tmp_path / "nope.png")

    def test_garbage_bytes_rejected(self, tmp_path):
        path = tmp_path / "junk.dat"
        path.write_bytes(b"\x00\x01\x02junkjunkjunk")
        with pytest.raises(UnsupportedFormatError):
            load_image(path)


class TestNormalize:
    def test_hits_target_moments(self):
        rng = np.random.default_rng(2)
        img = GrayImage(rng.normal(128.0, 10.0, size=(64, 64)))
        out = normalize(img, target_mean=100.0, target_variance=100.0)
        assert out.pixels.mean() == pytest.approx(100.0, abs=1e-9)
        assert out.pixels.var() == pytest.approx(100.0, abs=1e-6)

    def test_idempotent_when_not_clamped(self):
        rng = np.random.default_rng(3)
        img = GrayImage(rng.normal(128.0, 10.0, size=(64, 64)))
        once = normalize(img)
        twice = normalize(once)
        assert np.allclose(once.pixels, twice.pixels, atol=1e-9)

    def test_output_stays_in_byte_range(self):
        rng = np.random.default_rng(4)
        img = GrayImage(rng.integers(0, 256, size=(64, 64)).astype(float))
        out = normalize(img, target_mean=250.0, target_variance=5000.0)
        assert out.pixels.min() >= 0.0 and out.pixels.max() <= 255.0

    def test_constant_image_rejected(self):
        with pytest.raises(ZeroVarianceError):
            normalize(GrayImage(np.full((64, 64), 7.0)))


def block_variance_oracle(pixels, block, threshold):
    """Independent per-block variance decision, replicated to pixels."""
    height, width = pixels.shape
    flags = np.zeros((height, width), dtype=bool)
    for y0 in range(0, height, block):
        for x0 in range(0, width, block):
            tile = pixels[y0 : y0 + block, x0 : x0 + block]
            mean = tile.sum() / tile.size
            var = ((tile - mean) ** 2).sum() / tile.size
            flags[y0 : y0 + block, x0 : x0 + block] = var >= threshold
    return flags


class TestSegment:
    def test_matches_block_variance_oracle(self):
        rng = np.random.default_rng(5)
        # Mix of flat and textured tiles, with edge remainders (50 % 16 != 0).
        pixels = np.full((50, 70), 90.0)
        pixels[:, 30:] += rng.normal(0.0, 30.0, size=(50, 40))
        img = GrayImage(pixels)
        mask = segment(img, block=16, variance_threshold=100.0)
        assert np.array_equal(mask.flags, block_variance_oracle(img.pixels, 16, 100.0))

    def test_flat_image_has_no_foreground(self):
        img = GrayImage(np.full((64, 64), 10.0))
        with pytest.raises(EmptyForegroundError):
            segment(img)

    def test_textured_image_is_foreground(self):
        rng = np.random.default_rng(6)
        img = GrayImage(rng.normal(128.0, 40.0, size=(64, 64)))
        mask = segment(img)
        assert mask.coverage == 1.0
