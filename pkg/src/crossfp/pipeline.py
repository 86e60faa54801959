"""End-to-end descriptor extraction: image file to descriptor pair.

One image flows preprocess -> orientation field -> aligned quantized
field -> co-occurrence descriptor, and (in parallel conceptually) the
normalized image -> Gabor bank -> HoG descriptor. Batch extraction
fans out across processes, capped by the COROR_THREADS environment
variable.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import coror, fusion, gaborhog, orientation, preprocess
from .config import PipelineConfig, config_hash

THREADS_ENV = "COROR_THREADS"


@dataclass
class ExtractedPair:
    """Both raw descriptors of one image plus provenance hashes."""

    coror: np.ndarray
    gaborhog: np.ndarray
    source_hash: str
    config_hash: str


def image_hash(img: preprocess.GrayImage) -> str:
    """Content hash of the 8-bit pixel raster (shape included)."""
    raster = np.clip(np.rint(img.pixels), 0, 255).astype(np.uint8)
    digest = hashlib.sha256()
    digest.update(f"{raster.shape[0]}x{raster.shape[1]}:".encode("ascii"))
    digest.update(raster.tobytes())
    return digest.hexdigest()


def extract_pair(img: preprocess.GrayImage, config: PipelineConfig) -> ExtractedPair:
    """Run the full extraction pipeline on one loaded image."""
    pp, oc, cc, gc = config.preprocessing, config.orientation, config.coror, config.gabor
    normalized = preprocess.normalize(img, pp.target_mean, pp.target_variance)
    mask = preprocess.segment(normalized, pp.seg_block, pp.seg_threshold)

    field = orientation.estimate_orientation_field(normalized, oc.window)
    field = orientation.smooth_orientation_field(field, oc.sigma)
    field = orientation.merge_mask(field, mask)
    dominant = orientation.dominant_orientation(field)
    levels = orientation.quantize_field(orientation.align_field(field, dominant))
    coror_desc = coror.build_coror(levels, cc.offsets, cc.directions)

    bank = gaborhog.cached_bank(tuple(gc.wavelengths))
    gabor_desc = gaborhog.build_gabor_hog(normalized, bank, gc.bins)
    return ExtractedPair(
        coror=coror_desc.values,
        gaborhog=gabor_desc.values,
        source_hash=image_hash(img),
        config_hash=config_hash(config),
    )


def extract_fused(
    img: preprocess.GrayImage, model: fusion.CcaModel, config: PipelineConfig
) -> tuple[np.ndarray, ExtractedPair]:
    pair = extract_pair(img, config)
    return fusion.project_fuse(model, pair.coror, pair.gaborhog), pair


def _extract_path(args: tuple[str, PipelineConfig]) -> ExtractedPair:
    path, config = args
    return extract_pair(preprocess.load_image(path), config)


def worker_count(n_tasks: int) -> int:
    workers = os.cpu_count() or 1
    cap = os.environ.get(THREADS_ENV, "")
    if cap.strip():
        try:
            workers = min(workers, max(1, int(cap)))
        except ValueError:
            pass
    return max(1, min(workers, n_tasks))


def extract_many(paths: list[str | Path], config: PipelineConfig) -> list[ExtractedPair]:
    """Extract descriptor pairs for many images, in input order.

    Uses a process pool when it pays off; COROR_THREADS caps workers.
    """
    paths = [str(p) for p in paths]
    workers = worker_count(len(paths))
    if workers == 1 or len(paths) < 4:
        return [_extract_path((p, config)) for p in paths]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        chunk = max(1, len(paths) // (4 * workers))
        return list(pool.map(_extract_path, [(p, config) for p in paths], chunksize=chunk))
