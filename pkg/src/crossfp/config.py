"""Pipeline configuration: defaults, file parsing, and validation.

The config file is plain text, one `section.key = value` per line, `#`
comments allowed. Lists are comma-separated. Every key has a default,
so an empty (or absent) file is the documented default pipeline.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigParseError, ConfigValidationError

VALID_DIRECTIONS = (0, 45, 90, 135)
FUSION_MODES = ("concat", "sum")


@dataclass(frozen=True)
class OrientationConfig:
    window: int = 17
    sigma: float = 3.0


@dataclass(frozen=True)
class CororConfig:
    offsets: tuple[int, ...] = (5, 10, 15)
    directions: tuple[int, ...] = VALID_DIRECTIONS


@dataclass(frozen=True)
class GaborConfig:
    wavelengths: tuple[float, ...] = (4.0, 6.0, 8.0, 12.0)
    bins: int = 9


@dataclass(frozen=True)
class CcaConfig:
    epsilon: float = 1e-4
    max_k: int = 256
    fusion_mode: str = "concat"
    variance_keep: float = 0.99


@dataclass(frozen=True)
class PreprocessingConfig:
    target_mean: float = 100.0
    target_variance: float = 100.0
    seg_block: int = 16
    seg_threshold: float = 100.0


@dataclass(frozen=True)
class PipelineConfig:
    orientation: OrientationConfig = field(default_factory=OrientationConfig)
    coror: CororConfig = field(default_factory=CororConfig)
    gabor: GaborConfig = field(default_factory=GaborConfig)
    cca: CcaConfig = field(default_factory=CcaConfig)
    preprocessing: PreprocessingConfig = field(default_factory=PreprocessingConfig)


def _parse_int(text: str) -> int:
    return int(text, 10)


def _parse_float(text: str) -> float:
    return float(text)


def _parse_int_tuple(text: str) -> tuple[int, ...]:
    return tuple(int(part.strip(), 10) for part in text.split(",") if part.strip())


def _parse_float_tuple(text: str) -> tuple[float, ...]:
    return tuple(float(part.strip()) for part in text.split(",") if part.strip())


def _parse_str(text: str) -> str:
    return text


# key -> (section attribute, field name, value parser)
_KEY_TABLE = {
    "orientation.window": ("orientation", "window", _parse_int),
    "orientation.sigma": ("orientation", "sigma", _parse_float),
    "coror.offsets": ("coror", "offsets", _parse_int_tuple),
    "coror.directions": ("coror", "directions", _parse_int_tuple),
    "gabor.wavelengths": ("gabor", "wavelengths", _parse_float_tuple),
    "gabor.bins": ("gabor", "bins", _parse_int),
    "cca.epsilon": ("cca", "epsilon", _parse_float),
    "cca.max_k": ("cca", "max_k", _parse_int),
    "cca.fusion_mode": ("cca", "fusion_mode", _parse_str),
    "cca.variance_keep": ("cca", "variance_keep", _parse_float),
    "preprocessing.target_mean": ("preprocessing", "target_mean", _parse_float),
    "preprocessing.target_variance": ("preprocessing", "target_variance", _parse_float),
    "preprocessing.seg_block": ("preprocessing", "seg_block", _parse_int),
    "preprocessing.seg_threshold": ("preprocessing", "seg_threshold", _parse_float),
}


def set_key(config: PipelineConfig, key: str, raw_value: str, line: int | None = None) -> PipelineConfig:
    """Return a config with one dotted key replaced by a parsed value."""
    entry = _KEY_TABLE.get(key.strip())
    if entry is None:
        raise ConfigValidationError(key.strip(), "unknown key")
    section_name, field_name, parser = entry
    try:
        value = parser(raw_value.strip())
    except ValueError as exc:
        if line is not None:
            raise ConfigParseError(f"bad value for {key.strip()}: {raw_value.strip()!r}", line) from exc
        raise ConfigValidationError(key.strip(), f"bad value {raw_value.strip()!r}") from exc
    section = replace(getattr(config, section_name), **{field_name: value})
    return replace(config, **{section_name: section})


def parse_config_text(text: str) -> PipelineConfig:
    config = PipelineConfig()
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParseError("expected 'section.key = value'", lineno)
        key, _, value = line.partition("=")
        config = set_key(config, key, value, line=lineno)
    validate_config(config)
    return config


def parse_config(path: str | Path) -> PipelineConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def apply_overrides(config: PipelineConfig, overrides: list[str]) -> PipelineConfig:
    """Apply `section.key=value` strings (CLI --set) on top of a config."""
    for item in overrides:
        if "=" not in item:
            raise ConfigValidationError(item, "override must look like section.key=value")
        key, _, value = item.partition("=")
        config = set_key(config, key, value)
    validate_config(config)
    return config


def validate_config(config: PipelineConfig) -> None:
    o, c, g, a, p = config.orientation, config.coror, config.gabor, config.cca, config.preprocessing
    def bad(key, message):
        raise ConfigValidationError(key, message)

    if o.window < 3 or o.window % 2 == 0:
        bad("orientation.window", "must be an odd integer >= 3")
    if o.sigma < 0:
        bad("orientation.sigma", "must be >= 0")
    if not c.offsets:
        bad("coror.offsets", "must be nonempty")
    if any(d < 1 for d in c.offsets):
        bad("coror.offsets", "offsets must be >= 1")
    if not c.directions:
        bad("coror.directions", "must be nonempty")
    if any(d not in VALID_DIRECTIONS for d in c.directions):
        bad("coror.directions", f"directions must be among {VALID_DIRECTIONS}")
    if len(set(c.directions)) != len(c.directions):
        bad("coror.directions", "directions must be distinct")
    if not g.wavelengths:
        bad("gabor.wavelengths", "must be nonempty")
    if any(w <= 0 for w in g.wavelengths):
        bad("gabor.wavelengths", "wavelengths must be positive")
    if g.bins < 2:
        bad("gabor.bins", "must be >= 2")
    if a.epsilon < 0:
        bad("cca.epsilon", "must be >= 0")
    if a.max_k < 1:
        bad("cca.max_k", "must be >= 1")
    if a.fusion_mode not in FUSION_MODES:
        bad("cca.fusion_mode", f"must be one of {FUSION_MODES}")
    if not 0 < a.variance_keep <= 1:
        bad("cca.variance_keep", "must be in (0, 1]")
    if p.target_variance <= 0:
        bad("preprocessing.target_variance", "must be > 0")
    if p.seg_block < 1:
        bad("preprocessing.seg_block", "must be >= 1")
    if p.seg_threshold < 0:
        bad("preprocessing.seg_threshold", "must be >= 0")


def config_to_dict(config: PipelineConfig) -> dict:
    out: dict[str, dict] = {}
    for section_field in fields(config):
        section = getattr(config, section_field.name)
        out[section_field.name] = {
            f.name: list(v) if isinstance(v := getattr(section, f.name), tuple) else v
            for f in fields(section)
        }
    return out


def config_hash(config: PipelineConfig) -> str:
    """Stable hash of the extraction-relevant configuration."""
    canon = json.dumps(config_to_dict(config), sort_keys=True)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()
