"""Verification protocol and biometric error metrics.

A protocol scores every probe against every gallery identity (minimum
distance over that identity's templates), routes scores to genuine or
impostor lists by finger identity, and summarizes them as EER,
FMR100/FMR1000/ZeroFMR, and a DET table.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .config import PipelineConfig
from .errors import EmptyDatasetError, EmptyScoresError, ModelMismatchError
from .fusion import CcaModel, model_hash, project_fuse
from .pipeline import extract_many

IMAGE_SUFFIXES = (".png", ".pgm")

FMR100_CEILING = 0.01
FMR1000_CEILING = 0.001


@dataclass(frozen=True)
class DatasetImage:
    """One dataset file named <subject>_<finger>_<impression>.<ext>."""

    path: Path
    subject: str
    finger: str
    impression: str

    @property
    def identity(self) -> str:
        return f"{self.subject}_{self.finger}"


@dataclass
class ScoreSet:
    genuine: list[float] = field(default_factory=list)
    impostor: list[float] = field(default_factory=list)


@dataclass
class Metrics:
    eer: float
    fmr100: float
    fmr1000: float
    zero_fmr: float
    det: np.ndarray  # (m, 3) columns threshold, fmr, fnmr
    n_genuine: int
    n_impostor: int


def scan_dataset(directory: str | Path) -> list[DatasetImage]:
    """List a dataset directory, parsing identities out of filenames."""
    directory = Path(directory)
    if not directory.is_dir():
        raise EmptyDatasetError(f"{directory}: not a directory")
    images = []
    for path in sorted(directory.iterdir()):
        if path.suffix.lower() not in IMAGE_SUFFIXES:
            continue
        parts = path.stem.split("_")
        if len(parts) != 3:
            raise EmptyDatasetError(
                f"{path.name}: expected <subject>_<finger>_<impression>{path.suffix}"
            )
        images.append(DatasetImage(path, parts[0], parts[1], parts[2]))
    if not images:
        raise EmptyDatasetError(f"{directory}: no dataset images found")
    return images


def _fused_matrix(images, model, config):
    pairs = extract_many([img.path for img in images], config)
    vectors = np.stack([project_fuse(model, p.coror, p.gaborhog) for p in pairs])
    hashes = [p.source_hash for p in pairs]
    return vectors, hashes


def run_protocol(
    gallery_dir: str | Path,
    probe_dir: str | Path,
    model: CcaModel,
    config: PipelineConfig | None = None,
    impostor_cap: int | None = None,
    seed: int = 0,
    expected_model_hash: str | None = None,
) -> ScoreSet:
    """Score all probe-vs-gallery-identity comparisons.

    Genuine: probe against its own finger's template set (templates
    built from the identical source image are excluded, which makes
    gallery == probe runs meaningful). Impostor: probe against every
    other identity; pairs beyond ``impostor_cap`` are subsampled with
    the seeded generator.
    """
    config = config or PipelineConfig()
    if expected_model_hash is not None and model_hash(model) != expected_model_hash:
        raise ModelMismatchError("model does not match the hash the caller expects")
    gallery = scan_dataset(gallery_dir)
    probes = scan_dataset(probe_dir)

    gallery_vecs, _ = _fused_matrix(gallery, model, config)
    probe_vecs, _ = _fused_matrix(probes, model, config)

    distances = cdist(probe_vecs, gallery_vecs, metric="cityblock")
    # When gallery and probe overlap (same files), a probe must not be
    # scored against the very template built from it; a copy under a
    # different name is still a legitimate comparison.
    gallery_paths = [img.path.resolve() for img in gallery]
    for pi, probe in enumerate(probes):
        probe_path = probe.path.resolve()
        for gi, gallery_path in enumerate(gallery_paths):
            if probe_path == gallery_path:
                distances[pi, gi] = np.inf

    identities = sorted({img.identity for img in gallery})
    columns = {
        ident: np.flatnonzero([img.identity == ident for img in gallery])
        for ident in identities
    }

    scores = ScoreSet()
    impostor_pairs = []  # (probe index, identity) kept in deterministic order
    for pi, probe in enumerate(probes):
        for ident in identities:
            best = float(distances[pi, columns[ident]].min())
            if ident == probe.identity:
                if np.isfinite(best):
                    scores.genuine.append(best)
            else:
                impostor_pairs.append((pi, ident, best))

    if impostor_cap is not None and len(impostor_pairs) > impostor_cap:
        rng = np.random.default_rng(seed)
        chosen = rng.choice(len(impostor_pairs), size=impostor_cap, replace=False)
        impostor_pairs = [impostor_pairs[i] for i in sorted(chosen)]
    scores.impostor.extend(best for _, _, best in impostor_pairs)
    return scores


def compute_metrics(scores: ScoreSet) -> Metrics:
    """Threshold sweep over the union of scores (accept iff d <= t).

    The EER is read off the FMR/FNMR crossing with linear interpolation
    between adjacent sweep points; the FMRxxx figures are the smallest
    FNMR among sweep points whose FMR stays under the ceiling (1.0 when
    no point qualifies).
    """
    genuine = np.sort(np.asarray(scores.genuine, dtype=np.float64))
    impostor = np.sort(np.asarray(scores.impostor, dtype=np.float64))
    if genuine.size == 0 or impostor.size == 0:
        raise EmptyScoresError("both genuine and impostor scores are required")
    for name, arr in (("genuine", genuine), ("impostor", impostor)):
        if not np.isfinite(arr).all() or (arr < 0).any():
            raise ValueError(f"{name} scores must be finite and nonnegative")

    thresholds = np.unique(np.concatenate([genuine, impostor]))
    fmr = np.searchsorted(impostor, thresholds, side="right") / impostor.size
    fnmr = 1.0 - np.searchsorted(genuine, thresholds, side="right") / genuine.size

    diff = fmr - fnmr  # nondecreasing along the sweep
    if diff[0] >= 0.0:
        eer = 0.5 * (fmr[0] + fnmr[0])
    elif diff[-1] <= 0.0:
        eer = 0.5 * (fmr[-1] + fnmr[-1])
    else:
        i = int(np.argmax(diff >= 0.0))
        f0, g0, f1, g1 = fmr[i - 1], fnmr[i - 1], fmr[i], fnmr[i]
        slope = (f1 - f0) - (g1 - g0)
        frac = (g0 - f0) / slope if slope > 0 else 1.0
        eer = float(f0 + frac * (f1 - f0))

    def floor_fnmr(ceiling: float) -> float:
        ok = fmr <= ceiling
        return float(fnmr[ok].min()) if ok.any() else 1.0

    return Metrics(
        eer=float(eer),
        fmr100=floor_fnmr(FMR100_CEILING),
        fmr1000=floor_fnmr(FMR1000_CEILING),
        zero_fmr=floor_fnmr(0.0),
        det=np.column_stack([thresholds, fmr, fnmr]),
        n_genuine=int(genuine.size),
        n_impostor=int(impostor.size),
    )


def emit_report(
    metrics: Metrics,
    scores: ScoreSet,
    out_dir: str | Path,
    render_figures: bool = True,
) -> list[Path]:
    """Write metrics.json, scores.csv, det.csv, and report figures."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    metrics_path = out_dir / "metrics.json"
    metrics_path.write_text(
        json.dumps(
            {
                "eer": metrics.eer,
                "fmr100": metrics.fmr100,
                "fmr1000": metrics.fmr1000,
                "zero_fmr": metrics.zero_fmr,
                "n_genuine": metrics.n_genuine,
                "n_impostor": metrics.n_impostor,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    written.append(metrics_path)

    scores_path = out_dir / "scores.csv"
    with open(scores_path, "w", encoding="utf-8") as fh:
        fh.write("label,score\n")
        for value in scores.genuine:
            fh.write(f"genuine,{value:.17g}\n")
        for value in scores.impostor:
            fh.write(f"impostor,{value:.17g}\n")
    written.append(scores_path)

    det_path = out_dir / "det.csv"
    with open(det_path, "w", encoding="utf-8") as fh:
        fh.write("threshold,fmr,fnmr\n")
        for threshold, fmr, fnmr in metrics.det:
            fh.write(f"{threshold:.17g},{fmr:.17g},{fnmr:.17g}\n")
    written.append(det_path)

    if render_figures:
        from .plots import render_report_figures

        written.extend(render_report_figures(metrics, scores, out_dir))
    return written


def read_scores_csv(path: str | Path) -> ScoreSet:
    """Load a scores.csv written by emit_report."""
    scores = ScoreSet()
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "label,score":
            raise EmptyScoresError(f"{path}: unexpected header {header!r}")
        for line in fh:
            label, _, value = line.strip().partition(",")
            if label == "genuine":
                scores.genuine.append(float(value))
            elif label == "impostor":
                scores.impostor.append(float(value))
            else:
                raise EmptyScoresError(f"{path}: unknown label {label!r}")
    return scores
