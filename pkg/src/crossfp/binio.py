"""Binary artifact formats: descriptor files and JSON-header framing.

Every artifact starts with one JSON header line (UTF-8, newline
terminated) followed by raw little-endian numeric payload, so files are
inspectable with head(1) yet compact.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, BinaryIO

import numpy as np

from .errors import CorruptModelError, UnsupportedFormatError, VersionMismatchError

DESCRIPTOR_VERSION = 1
DESCRIPTOR_KINDS = ("coror", "gaborhog")


def write_header(fh: BinaryIO, header: dict[str, Any]) -> None:
    fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")


def read_header(fh: BinaryIO, what: str) -> dict[str, Any]:
    line = fh.readline(1 << 20)
    if not line.endswith(b"\n"):
        raise CorruptModelError(f"{what}: missing header line")
    try:
        header = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptModelError(f"{what}: malformed header") from exc
    if not isinstance(header, dict):
        raise CorruptModelError(f"{what}: header is not an object")
    return header


def check_version(header: dict[str, Any], expected: int, what: str) -> None:
    version = header.get("version")
    if version != expected:
        raise VersionMismatchError(f"{what}: version {version}, expected {expected}")


def read_exact(fh: BinaryIO, nbytes: int, what: str) -> bytes:
    data = fh.read(nbytes)
    if len(data) != nbytes:
        raise CorruptModelError(f"{what}: truncated payload")
    return data


def save_descriptor(path: str | Path, values: np.ndarray, kind: str, params: dict[str, Any]) -> None:
    """Write a descriptor as a JSON header plus little-endian float32."""
    if kind not in DESCRIPTOR_KINDS:
        raise ValueError(f"unknown descriptor kind {kind!r}")
    values = np.ascontiguousarray(values, dtype="<f4")
    header = {"version": DESCRIPTOR_VERSION, "kind": kind, **params, "length": int(values.size)}
    with open(path, "wb") as fh:
        write_header(fh, header)
        fh.write(values.tobytes())


def load_descriptor(path: str | Path) -> tuple[np.ndarray, dict[str, Any]]:
    """Read a descriptor file; returns (float32 vector, header)."""
    with open(path, "rb") as fh:
        header = read_header(fh, str(path))
        check_version(header, DESCRIPTOR_VERSION, str(path))
        kind = header.get("kind")
        if kind not in DESCRIPTOR_KINDS:
            raise UnsupportedFormatError(f"{path}: unknown descriptor kind {kind!r}")
        length = header.get("length")
        if not isinstance(length, int) or length < 0:
            raise CorruptModelError(f"{path}: bad length field")
        raw = read_exact(fh, 4 * length, str(path))
        if fh.read(1):
            raise CorruptModelError(f"{path}: trailing bytes after payload")
    return np.frombuffer(raw, dtype="<f4").copy(), header
