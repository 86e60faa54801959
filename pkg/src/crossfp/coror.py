"""Co-occurrence descriptor over quantized ridge orientations.

For each (offset d, direction phi) the 8x8 matrix counts ordered pixel
pairs (p, p + delta) whose quantization levels are (i, j). Counting is
directional: opposite displacements are distinct configurations and are
not accumulated together.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDescriptorError, OffsetTooLargeError
from .orientation import QUANT_LEVELS

DIRECTIONS_DEG = (0, 45, 90, 135)

# Displacement per unit offset in (row, col); rows grow downward, so the
# 45 degree direction points up-right.
_UNIT_STEP = {0: (0, 1), 45: (-1, 1), 90: (-1, 0), 135: (-1, -1)}

OFFSET_PRESETS = {
    "c1": (1, 2, 3),
    "c2": (1, 2, 3, 4),
    "g1": (5, 10, 15),
    "g2": (5, 10, 15, 20),
}
DEFAULT_OFFSETS = OFFSET_PRESETS["g1"]


@dataclass
class CoRorMatrix:
    """8x8 pair counts at one displacement."""

    counts: np.ndarray  # (8, 8) int64, counts[i-1][j-1] for levels (i, j)
    offset: int
    direction_deg: int

    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class CoRorDescriptor:
    """Concatenated, zero-mean, unit-length co-occurrence vector."""

    values: np.ndarray  # float64, length 64 * len(offsets) * len(directions)
    offsets: tuple[int, ...]
    directions: tuple[int, ...]


def cooccurrence(levels: np.ndarray, d: int, phi: int) -> CoRorMatrix:
    """Count ordered level pairs at displacement d along direction phi.

    ``levels`` holds quantization levels 1..8 with 0 marking invalid
    pixels. Pairs leaving the image or touching an invalid pixel are
    skipped. Counts land at counts[i-1][j-1] for a pair (i at p, j at
    p + delta).
    """
    levels = np.asarray(levels)
    if levels.ndim != 2:
        raise ValueError("quantized field must be 2-D")
    if d < 1:
        raise ValueError("offset must be >= 1")
    if phi not in _UNIT_STEP:
        raise ValueError(f"direction must be one of {DIRECTIONS_DEG}")
    height, width = levels.shape
    if d >= min(height, width):
        raise OffsetTooLargeError(f"offset {d} too large for {height}x{width} field")

    dr, dc = _UNIT_STEP[phi]
    dr, dc = dr * d, dc * d
    r0, r1 = max(0, -dr), height - max(0, dr)
    c0, c1 = max(0, -dc), width - max(0, dc)
    src = levels[r0:r1, c0:c1]
    dst = levels[r0 + dr : r1 + dr, c0 + dc : c1 + dc]

    both = (src > 0) & (dst > 0)
    i = src[both].astype(np.intp) - 1
    j = dst[both].astype(np.intp) - 1
    counts = np.bincount(i * QUANT_LEVELS + j, minlength=QUANT_LEVELS * QUANT_LEVELS)
    return CoRorMatrix(counts.reshape(QUANT_LEVELS, QUANT_LEVELS).astype(np.int64), d, phi)


def build_coror(
    levels: np.ndarray,
    offsets: tuple[int, ...] = DEFAULT_OFFSETS,
    directions: tuple[int, ...] = DIRECTIONS_DEG,
) -> CoRorDescriptor:
    """Concatenate co-occurrence matrices and normalize the vector.

    Matrices are ordered offset-major, direction-minor, each flattened
    row-major. The raw count vector is centered to zero mean and scaled
    to unit L2 norm.
    """
    if not offsets:
        raise ValueError("offsets must be nonempty")
    if not directions:
        raise ValueError("directions must be nonempty")
    parts = [
        cooccurrence(levels, d, phi).counts.ravel() for d in offsets for phi in directions
    ]
    raw = np.concatenate(parts).astype(np.float64)
    centered = raw - raw.mean()
    norm = float(np.linalg.norm(centered))
    if norm == 0.0:
        raise DegenerateDescriptorError("constant co-occurrence vector has no direction")
    return CoRorDescriptor(centered / norm, tuple(offsets), tuple(directions))
