"""Image loading, intensity normalization, and foreground segmentation.

Supported inputs are binary/ASCII PGM (P5/P2, maxval 255) and 8-bit
grayscale PNG. Pixels are kept as float64 throughout so that repeated
normalization stays a fixed point instead of accumulating quantization
error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    EmptyForegroundError,
    ImageTooSmallError,
    UnsupportedFormatError,
    ZeroVarianceError,
)

MIN_IMAGE_SIDE = 16
MIN_DESCRIPTOR_SIDE = 64

DEFAULT_TARGET_MEAN = 100.0
DEFAULT_TARGET_VARIANCE = 100.0
DEFAULT_SEG_BLOCK = 16
DEFAULT_SEG_THRESHOLD = 100.0

# Below this fraction of foreground pixels the image is rejected as empty.
MIN_FOREGROUND_FRACTION = 0.05


@dataclass
class GrayImage:
    """Grayscale image with float intensities in [0, 255]."""

    pixels: np.ndarray  # (height, width) float64, row-major
    dpi: int | None = None

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 2:
            raise UnsupportedFormatError("image must be single-channel 2-D")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass
class ForegroundMask:
    """Per-pixel boolean mask, True on the fingerprint region."""

    flags: np.ndarray  # (height, width) bool

    def __post_init__(self):
        self.flags = np.asarray(self.flags, dtype=bool)

    @property
    def height(self) -> int:
        return self.flags.shape[0]

    @property
    def width(self) -> int:
        return self.flags.shape[1]

    @property
    def coverage(self) -> float:
        return float(self.flags.mean())


def _read_pgm_tokens(data: bytes, count: int, pos: int) -> tuple[list[bytes], int]:
    """Read whitespace/comment-delimited header tokens from PGM bytes."""
    tokens: list[bytes] = []
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise UnsupportedFormatError("truncated PGM header")
        tokens.append(data[start:pos])
    return tokens, pos


def read_pgm(path: str | Path) -> GrayImage:
    """Parse a P5 (binary) or P2 (ASCII) PGM file with maxval <= 255."""
    data = Path(path).read_bytes()
    if data[:2] not in (b"P5", b"P2"):
        raise UnsupportedFormatError(f"{path}: not a P5/P2 PGM file")
    magic = data[:2]
    (w_tok, h_tok, max_tok), pos = _read_pgm_tokens(data, 3, 2)
    try:
        width, height, maxval = int(w_tok), int(h_tok), int(max_tok)
    except ValueError as exc:
        raise UnsupportedFormatError(f"{path}: malformed PGM header") from exc
    if width <= 0 or height <= 0:
        raise UnsupportedFormatError(f"{path}: nonpositive PGM dimensions")
    if not 0 < maxval <= 255:
        raise UnsupportedFormatError(f"{path}: only 8-bit PGM supported (maxval {maxval})")
    if magic == b"P5":
        pos += 1  # single whitespace byte after maxval
        raster = data[pos : pos + width * height]
        if len(raster) < width * height:
            raise UnsupportedFormatError(f"{path}: truncated PGM raster")
        pixels = np.frombuffer(raster, dtype=np.uint8).astype(np.float64)
    else:
        values = data[pos:].split()
        if len(values) < width * height:
            raise UnsupportedFormatError(f"{path}: truncated PGM raster")
        pixels = np.array(values[: width * height], dtype=np.float64)
        if pixels.min() < 0 or pixels.max() > maxval:
            raise UnsupportedFormatError(f"{path}: PGM sample out of range")
    return GrayImage(pixels.reshape(height, width))


def write_pgm(img: GrayImage | np.ndarray, path: str | Path) -> None:
    """Write an image as binary P5 PGM, rounding intensities to uint8."""
    pixels = img.pixels if isinstance(img, GrayImage) else np.asarray(img)
    raster = np.clip(np.rint(pixels), 0, 255).astype(np.uint8)
    height, width = raster.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(raster.tobytes())


def write_mask_pgm(mask: ForegroundMask, path: str | Path) -> None:
    """Debug export: foreground mask as a 0/255 PGM."""
    write_pgm(np.where(mask.flags, 255.0, 0.0), path)


def _read_png(path: str | Path) -> GrayImage:
    try:
        with Image.open(path) as im:
            if im.format != "PNG":
                raise UnsupportedFormatError(f"{path}: not a PNG file")
            if im.mode != "L":
                raise UnsupportedFormatError(
                    f"{path}: only 8-bit grayscale PNG supported (mode {im.mode})"
                )
            dpi = im.info.get("dpi")
            pixels = np.asarray(im, dtype=np.float64)
    except UnidentifiedImageError as exc:
        raise UnsupportedFormatError(f"{path}: unrecognized image file") from exc
    return GrayImage(pixels, dpi=int(round(dpi[0])) if dpi else None)


def load_image(path: str | Path, min_size: int | None = MIN_DESCRIPTOR_SIDE) -> GrayImage:
    """Load a grayscale fingerprint image from PGM or PNG.

    ``min_size`` guards descriptor extraction (default 64 px per side);
    pass None to load small images for inspection or testing.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    head = path.open("rb").read(8)
    if head[:2] in (b"P5", b"P2"):
        img = read_pgm(path)
    elif head[:8] == b"\x89PNG\r\n\x1a\n":
        img = _read_png(path)
    else:
        raise UnsupportedFormatError(f"{path}: unsupported format")
    if min_size is not None and (img.width < min_size or img.height < min_size):
        raise ImageTooSmallError(
            f"{path}: {img.width}x{img.height} below minimum {min_size}x{min_size}"
        )
    return img


def normalize(
    img: GrayImage,
    target_mean: float = DEFAULT_TARGET_MEAN,
    target_variance: float = DEFAULT_TARGET_VARIANCE,
) -> GrayImage:
    """Rescale intensities to a prescribed global mean and variance.

    Affine per-pixel map: out = m0 + (in - mean) * sqrt(v0 / var),
    clamped to [0, 255]. Idempotent up to clamping.
    """
    pixels = img.pixels
    var = float(pixels.var())
    if var <= 0.0:
        raise ZeroVarianceError("constant image cannot be normalized")
    scaled = target_mean + (pixels - pixels.mean()) * np.sqrt(target_variance / var)
    return GrayImage(np.clip(scaled, 0.0, 255.0), dpi=img.dpi)


def segment(
    img: GrayImage,
    block: int = DEFAULT_SEG_BLOCK,
    variance_threshold: float = DEFAULT_SEG_THRESHOLD,
) -> ForegroundMask:
    """Block-variance segmentation of the fingerprint foreground.

    A block is foreground iff its intensity variance >= threshold; the
    block decision is replicated to pixel resolution. Edge blocks smaller
    than ``block`` are evaluated on their actual pixels.
    """
    if block < 1:
        raise ValueError("block size must be positive")
    pixels = img.pixels
    height, width = pixels.shape
    flags = np.zeros((height, width), dtype=bool)
    for y0 in range(0, height, block):
        for x0 in range(0, width, block):
            tile = pixels[y0 : y0 + block, x0 : x0 + block]
            if tile.var() >= variance_threshold:
                flags[y0 : y0 + block, x0 : x0 + block] = True
    mask = ForegroundMask(flags)
    if mask.coverage < MIN_FOREGROUND_FRACTION:
        raise EmptyForegroundError(
            f"foreground covers {mask.coverage:.1%} < {MIN_FOREGROUND_FRACTION:.0%}"
        )
    return mask
