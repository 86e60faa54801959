"""Ridge orientation field estimation and angular normalization.

Orientations are ridge directions in radians within [0, pi), estimated
from windowed Sobel gradient moments. Smoothing and averaging operate
on the doubled-angle vector representation because ridge orientation is
only defined modulo pi.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import NoValidPixelsError
from .preprocess import ForegroundMask, GrayImage

DEFAULT_WINDOW = 17
DEFAULT_SMOOTH_SIGMA = 3.0
SMOOTH_TRUNCATE = 3.0

QUANT_LEVELS = 8
QUANT_STEP_DEG = 180.0 / QUANT_LEVELS

# Kernels in correlate (not convolve) orientation; x increases with the
# column index, y with the row index.
SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = SOBEL_X.T.copy()


@dataclass
class OrientationField:
    """Per-pixel ridge angles with a validity mask.

    ``angles`` is float64 radians in [0, pi); entries at invalid pixels
    are zero and must be ignored.
    """

    angles: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.angles.shape != self.valid.shape:
            raise ValueError("angles and valid mask must share a shape")

    @property
    def shape(self) -> tuple[int, int]:
        return self.angles.shape

    def count_valid(self) -> int:
        return int(self.valid.sum())


def _wrap_pi(angles: np.ndarray) -> np.ndarray:
    """Reduce angles to [0, pi), guarding the mod-pi rounding edge."""
    wrapped = np.mod(angles, np.pi)
    return np.where(wrapped >= np.pi, 0.0, wrapped)


def _window_sum(values: np.ndarray, window: int) -> np.ndarray:
    """Centered window x window sum with zero padding, separable passes."""
    row = np.ones((1, window))
    out = ndimage.correlate(values, row, mode="constant", cval=0.0)
    return ndimage.correlate(out, row.T, mode="constant", cval=0.0)


def estimate_orientation_field(img: GrayImage, window: int = DEFAULT_WINDOW) -> OrientationField:
    """Estimate the per-pixel ridge orientation field.

    Local gradient moments are pooled over a centered window x window
    neighborhood:

        gxy = sum 2 * gx * gy,   gxx = sum (gx^2 - gy^2)

    and the ridge angle (perpendicular to the mean gradient) is
    0.5 * atan2(gxy, gxx) + pi/2, wrapped to [0, pi). Pixels whose
    window carries no gradient energy are invalid, as is the one-pixel
    frame where the Sobel support leaves the image.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be a positive odd size")
    pixels = img.pixels
    gx = ndimage.correlate(pixels, SOBEL_X, mode="constant", cval=0.0)
    gy = ndimage.correlate(pixels, SOBEL_Y, mode="constant", cval=0.0)

    gxy = _window_sum(2.0 * gx * gy, window)
    gxx = _window_sum(gx * gx - gy * gy, window)
    energy = _window_sum(gx * gx + gy * gy, window)

    angles = _wrap_pi(0.5 * np.arctan2(gxy, gxx) + 0.5 * np.pi)
    valid = energy > 0.0
    valid[0, :] = valid[-1, :] = False
    valid[:, 0] = valid[:, -1] = False
    angles[~valid] = 0.0
    return OrientationField(angles, valid)


def smooth_orientation_field(
    field: OrientationField, sigma: float = DEFAULT_SMOOTH_SIGMA
) -> OrientationField:
    """Gaussian-smooth the field in doubled-angle vector space.

    Invalid pixels contribute zero vectors, so they neither vote nor
    gain validity. A valid pixel whose smoothed vector cancels out
    keeps its original angle.
    """
    if sigma <= 0:
        return OrientationField(field.angles.copy(), field.valid.copy())
    doubled = 2.0 * field.angles
    sin2 = np.where(field.valid, np.sin(doubled), 0.0)
    cos2 = np.where(field.valid, np.cos(doubled), 0.0)
    opts = dict(sigma=sigma, mode="constant", cval=0.0, truncate=SMOOTH_TRUNCATE)
    sin_s = ndimage.gaussian_filter(sin2, **opts)
    cos_s = ndimage.gaussian_filter(cos2, **opts)

    magnitude = np.hypot(sin_s, cos_s)
    smoothed = _wrap_pi(0.5 * np.arctan2(sin_s, cos_s))
    angles = np.where(magnitude > 1e-12, smoothed, field.angles)
    angles = np.where(field.valid, angles, 0.0)
    return OrientationField(angles, field.valid.copy())


def merge_mask(field: OrientationField, mask: ForegroundMask | None) -> OrientationField:
    """Restrict field validity to the foreground mask."""
    if mask is None:
        return field
    if mask.flags.shape != field.shape:
        raise ValueError("mask shape does not match field shape")
    valid = field.valid & mask.flags
    angles = np.where(valid, field.angles, 0.0)
    return OrientationField(angles, valid)


def dominant_orientation(field: OrientationField) -> float:
    """Most frequent orientation over 1-degree bins, in radians.

    Returns the center of the maximal-count bin; ties break to the
    smaller angle.
    """
    if not field.valid.any():
        raise NoValidPixelsError("orientation field has no valid pixels")
    deg = np.degrees(field.angles[field.valid])
    bins = np.clip(np.floor(deg).astype(np.intp), 0, 179)
    counts = np.bincount(bins, minlength=180)
    peak = int(np.argmax(counts))
    return float(np.radians(peak + 0.5))


def align_field(field: OrientationField, dominant: float) -> OrientationField:
    """Rotate all angles so the dominant orientation maps to zero.

    psi = (theta - dominant) mod pi; validity is unchanged.
    """
    aligned = _wrap_pi(field.angles - dominant)
    aligned = np.where(field.valid, aligned, 0.0)
    return OrientationField(aligned, field.valid.copy())


def quantize_field(field: OrientationField) -> np.ndarray:
    """Quantize angles into 8 levels over half-open 22.5-degree bins.

    Level b covers ((b-1)*22.5, b*22.5] degrees; an angle of exactly
    zero is treated as 180 and lands in level 8. Invalid pixels map to
    level 0. Returns a uint8 array shaped like the field.
    """
    deg = np.degrees(field.angles)
    levels = np.ceil(deg / QUANT_STEP_DEG - 1e-12)
    levels = np.clip(levels, 1, QUANT_LEVELS).astype(np.uint8)
    levels[deg <= 1e-9] = QUANT_LEVELS
    levels[~field.valid] = 0
    return levels
