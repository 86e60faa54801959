"""Synthetic cross-sensor fingerprint corpus.

Each finger is a phase-modulated sinusoidal ridge pattern: a base
grating (period 5-11 px, random direction) whose phase is perturbed by
two low-frequency waves, giving smoothly curving ridges. Sensor
profiles re-render the same finger with geometric scale, contrast
gain/offset, noise, and crop differences. Everything is driven by one
seed, so a corpus is bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InvalidProfileError

CANVAS = 192
RIDGE_AMPLITUDE = 55.0
PERIOD_RANGE = (5.0, 11.0)


@dataclass(frozen=True)
class SensorProfile:
    """Rendering distortions of one capture device."""

    name: str
    scale: float = 1.0  # geometric magnification (ridge period multiplier)
    gain: float = 1.0  # ridge contrast multiplier
    offset: float = 0.0  # additive brightness shift
    noise_sigma: float = 2.0
    crop: float = 0.0  # fraction of each canvas side removed


DEFAULT_PROFILES = (
    SensorProfile("sensorA", scale=1.0, gain=1.0, noise_sigma=2.0),
    SensorProfile("sensorB", scale=1.15, gain=0.8, offset=15.0, noise_sigma=6.0, crop=0.10),
)


def validate_profile(profile: SensorProfile) -> None:
    if not profile.name or any(ch in profile.name for ch in "/\\"):
        raise InvalidProfileError(f"bad profile name {profile.name!r}")
    if profile.scale <= 0:
        raise InvalidProfileError(f"{profile.name}: scale must be positive")
    if profile.gain <= 0:
        raise InvalidProfileError(f"{profile.name}: gain must be positive")
    if profile.noise_sigma < 0:
        raise InvalidProfileError(f"{profile.name}: noise sigma must be >= 0")
    if not 0 <= profile.crop < 0.5:
        raise InvalidProfileError(f"{profile.name}: crop must be in [0, 0.5)")


@dataclass(frozen=True)
class FingerParams:
    """Identity of one synthetic finger in its own coordinate frame."""

    period: float
    base_angle: float
    mod_amp: tuple[float, float]
    mod_freq: tuple[tuple[float, float], tuple[float, float]]
    mod_phase: tuple[float, float]


def draw_finger_params(rng: np.random.Generator) -> FingerParams:
    amps = rng.uniform(2.0, 6.0, size=2)
    freqs = []
    for _ in range(2):
        direction = rng.uniform(0.0, 2.0 * np.pi)
        magnitude = rng.uniform(0.6, 1.8) / CANVAS
        freqs.append((magnitude * np.cos(direction), magnitude * np.sin(direction)))
    return FingerParams(
        period=float(rng.uniform(*PERIOD_RANGE)),
        base_angle=float(rng.uniform(0.0, np.pi)),
        mod_amp=(float(amps[0]), float(amps[1])),
        mod_freq=(tuple(freqs[0]), tuple(freqs[1])),
        mod_phase=(float(rng.uniform(0, 2 * np.pi)), float(rng.uniform(0, 2 * np.pi))),
    )


def render_finger(
    params: FingerParams,
    profile: SensorProfile,
    rng: np.random.Generator,
) -> np.ndarray:
    """Render one impression of a finger under a sensor profile.

    Returns a uint8 image. Consumes a fixed number of random draws per
    call regardless of profile values, keeping corpus generation
    deterministic under one shared generator.
    """
    jitter = rng.uniform(-8.0, 8.0, size=2)
    noise = rng.normal(0.0, 1.0, size=(CANVAS, CANVAS))
    out_side = int(round(CANVAS * (1.0 - profile.crop)))
    max_off = CANVAS - out_side
    offsets = rng.integers(0, max_off + 1, size=2)

    yy, xx = np.mgrid[0:CANVAS, 0:CANVAS].astype(np.float64)
    # Finger-frame coordinates: sensor scale magnifies the rendered
    # pattern, jitter translates it between impressions.
    u = (xx - CANVAS / 2.0) / profile.scale + jitter[0]
    v = (yy - CANVAS / 2.0) / profile.scale + jitter[1]

    phase = (2.0 * np.pi / params.period) * (
        u * np.cos(params.base_angle) + v * np.sin(params.base_angle)
    )
    for amp, (fx, fy), ph in zip(params.mod_amp, params.mod_freq, params.mod_phase):
        phase = phase + amp * np.sin(2.0 * np.pi * (fx * u + fy * v) + ph)

    image = 127.5 + profile.offset + profile.gain * RIDGE_AMPLITUDE * np.cos(phase)
    image = image + profile.noise_sigma * noise
    image = np.clip(np.rint(image), 0, 255).astype(np.uint8)
    oy, ox = int(offsets[1]), int(offsets[0])
    return image[oy : oy + out_side, ox : ox + out_side]


def generate_synthetic_corpus(
    out_dir: str | Path,
    n_fingers: int,
    impressions_per_sensor: int = 2,
    profiles: tuple[SensorProfile, ...] = DEFAULT_PROFILES,
    seed: int = 0,
) -> list[Path]:
    """Write the corpus as <out>/<profile>/<subject>_<finger>_<impression>.png.

    One finger per synthetic subject. Returns all written paths.
    """
    if n_fingers < 2:
        raise ValueError("need at least 2 fingers")
    if impressions_per_sensor < 1:
        raise ValueError("need at least 1 impression per sensor")
    if len(profiles) < 2:
        raise ValueError("need at least 2 sensor profiles")
    for profile in profiles:
        validate_profile(profile)
    if len({p.name for p in profiles}) != len(profiles):
        raise InvalidProfileError("profile names must be distinct")

    out_dir = Path(out_dir)
    rng = np.random.default_rng(seed)
    fingers = [draw_finger_params(rng) for _ in range(n_fingers)]

    written = []
    for profile in profiles:
        sensor_dir = out_dir / profile.name
        sensor_dir.mkdir(parents=True, exist_ok=True)
        for idx, params in enumerate(fingers):
            for imp in range(impressions_per_sensor):
                raster = render_finger(params, profile, rng)
                path = sensor_dir / f"s{idx:03d}_f1_i{imp}.png"
                Image.fromarray(raster, mode="L").save(path)
                written.append(path)
    return written
