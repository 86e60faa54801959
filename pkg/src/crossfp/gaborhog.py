"""Gabor filter bank responses summarized by per-map gradient histograms.

The bank holds even-symmetric (cosine-phase) real Gabor kernels at 4
wavelengths x 8 orientations. Each response map is reduced to a 3x3
grid of magnitude-weighted unsigned-gradient-orientation histograms,
normalized per map, and concatenated in bank order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.signal import fftconvolve

from .errors import ImageTooSmallError, InvalidConfigError
from .preprocess import GrayImage

DEFAULT_WAVELENGTHS = (4.0, 6.0, 8.0, 12.0)
BANK_ORIENTATIONS_DEG = tuple(k * 22.5 for k in range(8))
SIGMA_PER_WAVELENGTH = 0.56
KERNEL_TRUNCATE = 3.0

HOG_GRID = 3
DEFAULT_HOG_BINS = 9


@dataclass
class GaborFilter:
    kernel: np.ndarray  # odd-sized square, zero mean
    wavelength: float
    orientation_deg: float
    sigma: float


@dataclass
class GaborBank:
    filters: tuple[GaborFilter, ...]  # wavelength-major, orientation-minor

    def __len__(self) -> int:
        return len(self.filters)

    def max_kernel_side(self) -> int:
        return max(f.kernel.shape[0] for f in self.filters)


@dataclass
class FeatureMap:
    responses: np.ndarray  # float64, image-sized, signed
    wavelength: float
    orientation_deg: float


@dataclass
class GaborHogDescriptor:
    values: np.ndarray  # float64, 32 * 9 * bins
    wavelengths: tuple[float, ...]
    bins: int


def _gabor_kernel(wavelength: float, orientation_deg: float) -> tuple[np.ndarray, float]:
    sigma = SIGMA_PER_WAVELENGTH * wavelength
    half = int(np.ceil(KERNEL_TRUNCATE * sigma))
    coords = np.arange(-half, half + 1, dtype=np.float64)
    x, y = np.meshgrid(coords, coords)
    theta = np.radians(orientation_deg)
    # Carrier varies along the filter orientation; envelope is isotropic
    # (aspect ratio 1), so only the rotated x coordinate matters.
    xr = x * np.cos(theta) + y * np.sin(theta)
    kernel = np.exp(-(x * x + y * y) / (2.0 * sigma * sigma)) * np.cos(
        2.0 * np.pi * xr / wavelength
    )
    kernel -= kernel.mean()
    return kernel, sigma


def make_gabor_bank(wavelengths: tuple[float, ...] = DEFAULT_WAVELENGTHS) -> GaborBank:
    """Build the even-symmetric Gabor bank, one filter per (wavelength,
    orientation). Kernels are mean-subtracted so constant regions give
    zero response."""
    filters = []
    for wavelength in wavelengths:
        if wavelength <= 0:
            raise InvalidConfigError(f"wavelength must be positive, got {wavelength}")
        for orientation in BANK_ORIENTATIONS_DEG:
            kernel, sigma = _gabor_kernel(float(wavelength), orientation)
            filters.append(GaborFilter(kernel, float(wavelength), orientation, sigma))
    return GaborBank(tuple(filters))


@lru_cache(maxsize=4)
def cached_bank(wavelengths: tuple[float, ...]) -> GaborBank:
    return make_gabor_bank(wavelengths)


def apply_bank(img: GrayImage, bank: GaborBank) -> list[FeatureMap]:
    """Convolve the image with every filter (same-size output).

    Borders are reflect-padded by each kernel's half size, so output
    pixels never see synthetic zeros. Responses keep their sign.
    """
    pixels = img.pixels
    side = bank.max_kernel_side()
    if pixels.shape[0] < side or pixels.shape[1] < side:
        raise ImageTooSmallError(
            f"image {pixels.shape[1]}x{pixels.shape[0]} smaller than kernel side {side}"
        )
    maps = []
    pad_cache: dict[int, np.ndarray] = {}
    # DC-free kernels leave only FFT round-off on flat input; a map that
    # never rises above that residue is snapped to exact zero so the HoG
    # block normalization cannot inflate numerical noise.
    noise_floor = 1e-10 * max(1.0, float(np.abs(pixels).max()))
    for filt in bank.filters:
        half = filt.kernel.shape[0] // 2
        padded = pad_cache.get(half)
        if padded is None:
            padded = np.pad(pixels, half, mode="reflect")
            pad_cache[half] = padded
        full = fftconvolve(padded, filt.kernel, mode="same")
        responses = full[half : half + pixels.shape[0], half : half + pixels.shape[1]]
        if np.abs(responses).max() <= noise_floor:
            responses = np.zeros_like(responses)
        maps.append(FeatureMap(np.ascontiguousarray(responses), filt.wavelength, filt.orientation_deg))
    return maps


def hog_of_map(fmap: FeatureMap, bins: int = DEFAULT_HOG_BINS) -> np.ndarray:
    """3x3-cell HoG of one response map, L2-normalized as one block.

    Gradient orientation is unsigned (mod 180 degrees) with bin centers
    at k*(180/bins); each sample's magnitude is split linearly between
    the two nearest centers, wrapping 180 back to 0. An all-zero block
    (constant map) is returned untouched.
    """
    responses = fmap.responses
    height, width = responses.shape
    if height < HOG_GRID or width < HOG_GRID:
        raise ImageTooSmallError(f"map {width}x{height} smaller than {HOG_GRID}x{HOG_GRID}")
    if bins < 2:
        raise InvalidConfigError("HoG needs at least 2 bins")

    gy, gx = np.gradient(responses)
    magnitude = np.hypot(gx, gy)
    angle = np.degrees(np.arctan2(gy, gx)) % 180.0

    # Fractional position among bin centers; floor/ceil neighbors share
    # the magnitude, index wrapping 180 -> 0.
    position = angle / (180.0 / bins)
    lower = np.floor(position)
    frac = position - lower
    lower_bin = lower.astype(np.intp) % bins
    upper_bin = (lower_bin + 1) % bins

    row_edges = [0, height // HOG_GRID, 2 * (height // HOG_GRID), height]
    col_edges = [0, width // HOG_GRID, 2 * (width // HOG_GRID), width]
    block = np.zeros(HOG_GRID * HOG_GRID * bins, dtype=np.float64)
    cell = 0
    for r in range(HOG_GRID):
        for c in range(HOG_GRID):
            rows = slice(row_edges[r], row_edges[r + 1])
            cols = slice(col_edges[c], col_edges[c + 1])
            mag = magnitude[rows, cols].ravel()
            lo = lower_bin[rows, cols].ravel()
            hi = upper_bin[rows, cols].ravel()
            fr = frac[rows, cols].ravel()
            hist = np.bincount(lo, weights=mag * (1.0 - fr), minlength=bins)
            hist += np.bincount(hi, weights=mag * fr, minlength=bins)
            block[cell * bins : (cell + 1) * bins] = hist
            cell += 1
    norm = np.linalg.norm(block)
    if norm > 0.0:
        block /= norm
    return block


def build_gabor_hog(
    img: GrayImage, bank: GaborBank, bins: int = DEFAULT_HOG_BINS
) -> GaborHogDescriptor:
    """Concatenate per-map HoG blocks in bank order."""
    blocks = [hog_of_map(fmap, bins) for fmap in apply_bank(img, bank)]
    wavelengths = tuple(dict.fromkeys(f.wavelength for f in bank.filters))
    return GaborHogDescriptor(np.concatenate(blocks), wavelengths, bins)
