"""Template enrollment and verification matching.

A subject may hold several templates; the probe score is the minimum
city-block distance over them, and a probe is accepted when its score
is at or below the threshold (distances, so smaller means more alike).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import binio
from .config import PipelineConfig
from .errors import (
    CorruptModelError,
    DBWriteFailureError,
    DimensionMismatchError,
    ModelMismatchError,
    UnknownSubjectError,
)
from .fusion import CcaModel, model_hash
from .pipeline import extract_fused
from .preprocess import GrayImage

DB_VERSION = 1
_LEN = struct.Struct("<I")


def cityblock(a: np.ndarray, b: np.ndarray) -> float:
    """Sum of absolute coordinate differences."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DimensionMismatchError(f"vector lengths differ: {a.size} vs {b.size}")
    return float(np.abs(a - b).sum())


@dataclass
class TemplateRecord:
    subject_id: str
    fused: np.ndarray
    finger_id: str | None = None
    source_hash: str = ""
    config_hash: str = ""

    def __post_init__(self):
        if not self.subject_id:
            raise ValueError("subject_id must be nonempty")
        self.fused = np.asarray(self.fused, dtype=np.float64).ravel()


@dataclass
class MatchResult:
    score: float
    per_template_scores: list[float]
    decision: str | None = None


class TemplateDB:
    """In-memory template store bound to one fusion model.

    Persisted as an append-log: one JSON header line, then
    length-prefixed (metadata JSON, float64 vector) record pairs.
    """

    def __init__(self, bound_model_hash: str):
        self.model_hash = bound_model_hash
        self._records: dict[str, list[TemplateRecord]] = {}

    def add(self, record: TemplateRecord) -> None:
        self._records.setdefault(record.subject_id, []).append(record)

    def subjects(self) -> list[str]:
        return list(self._records)

    def records_for(self, subject_id: str) -> list[TemplateRecord]:
        records = self._records.get(subject_id)
        if not records:
            raise UnknownSubjectError(f"no templates enrolled for {subject_id!r}")
        return list(records)

    def __len__(self) -> int:
        return sum(len(v) for v in self._records.values())

    def all_records(self) -> list[TemplateRecord]:
        return [r for records in self._records.values() for r in records]

    # -- persistence ---------------------------------------------------

    @staticmethod
    def _record_bytes(record: TemplateRecord) -> bytes:
        meta = {
            "subject_id": record.subject_id,
            "finger_id": record.finger_id,
            "source_hash": record.source_hash,
            "config_hash": record.config_hash,
        }
        meta_raw = json.dumps(meta, sort_keys=True).encode("utf-8")
        vec_raw = np.ascontiguousarray(record.fused, dtype="<f8").tobytes()
        return _LEN.pack(len(meta_raw)) + meta_raw + _LEN.pack(len(vec_raw)) + vec_raw

    def save(self, path: str | Path) -> None:
        try:
            with open(path, "wb") as fh:
                binio.write_header(fh, {"version": DB_VERSION, "model_hash": self.model_hash})
                for record in self.all_records():
                    fh.write(self._record_bytes(record))
        except OSError as exc:
            raise DBWriteFailureError(f"cannot write template db {path}: {exc}") from exc

    def append_to(self, path: str | Path, record: TemplateRecord) -> None:
        """Append one already-added record to an existing db file."""
        try:
            with open(path, "ab") as fh:
                fh.write(self._record_bytes(record))
        except OSError as exc:
            raise DBWriteFailureError(f"cannot append to template db {path}: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "TemplateDB":
        with open(path, "rb") as fh:
            header = binio.read_header(fh, str(path))
            binio.check_version(header, DB_VERSION, str(path))
            bound = header.get("model_hash")
            if not isinstance(bound, str) or not bound:
                raise CorruptModelError(f"{path}: missing model_hash")
            db = cls(bound)
            while True:
                prefix = fh.read(_LEN.size)
                if not prefix:
                    break
                if len(prefix) != _LEN.size:
                    raise CorruptModelError(f"{path}: truncated record prefix")
                meta_raw = binio.read_exact(fh, _LEN.unpack(prefix)[0], str(path))
                try:
                    meta = json.loads(meta_raw.decode("utf-8"))
                except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                    raise CorruptModelError(f"{path}: malformed record metadata") from exc
                vec_len = _LEN.unpack(binio.read_exact(fh, _LEN.size, str(path)))[0]
                if vec_len % 8:
                    raise CorruptModelError(f"{path}: vector byte length not float64-aligned")
                vec_raw = binio.read_exact(fh, vec_len, str(path))
                db.add(
                    TemplateRecord(
                        subject_id=meta.get("subject_id", ""),
                        finger_id=meta.get("finger_id"),
                        source_hash=meta.get("source_hash", ""),
                        config_hash=meta.get("config_hash", ""),
                        fused=np.frombuffer(vec_raw, dtype="<f8").copy(),
                    )
                )
        return db


def _check_model(model: CcaModel, db: TemplateDB) -> None:
    fitted = model_hash(model)
    if fitted != db.model_hash:
        raise ModelMismatchError(
            f"template db bound to model {db.model_hash[:12]}, got {fitted[:12]}"
        )


def enroll(
    img: GrayImage,
    subject_id: str,
    model: CcaModel,
    db: TemplateDB,
    config: PipelineConfig | None = None,
    finger_id: str | None = None,
) -> TemplateRecord:
    """Extract, fuse, and store one template for a subject."""
    _check_model(model, db)
    config = config or PipelineConfig()
    fused, pair = extract_fused(img, model, config)
    record = TemplateRecord(
        subject_id=subject_id,
        fused=fused,
        finger_id=finger_id,
        source_hash=pair.source_hash,
        config_hash=pair.config_hash,
    )
    db.add(record)
    return record


def match(
    img: GrayImage,
    subject_id: str,
    model: CcaModel,
    db: TemplateDB,
    config: PipelineConfig | None = None,
) -> MatchResult:
    """Score a probe against all of a subject's templates.

    The running minimum starts at +inf; with r >= 1 templates it always
    resolves to a finite min(S_1..S_r).
    """
    _check_model(model, db)
    config = config or PipelineConfig()
    records = db.records_for(subject_id)
    fused, _ = extract_fused(img, model, config)
    best = float("inf")
    per_template = []
    for record in records:
        score = cityblock(fused, record.fused)
        per_template.append(score)
        best = min(best, score)
    return MatchResult(score=best, per_template_scores=per_template)


def verify(result: MatchResult, threshold: float) -> str:
    """Accept iff the match score is at or below the threshold."""
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    decision = "accept" if result.score <= threshold else "reject"
    result.decision = decision
    return decision
