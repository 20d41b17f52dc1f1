"""Synthetic z-axis gyroscope recordings.

The sensor reads ``(1 + scale) * omega + bias + noise`` where ``noise`` is
white Gaussian.  Misalignment is not modelled (single axis only), so a
recording is fully described by the true turntable rate, the error terms and
the noise seed.

Flipping the sensor on the turntable negates the sensed rate while the bias
keeps its sign, so the "down" recording is generated from ``-rate`` and stored
raw (no sign normalisation).
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

# LSM6DSO-class noise density, read as mDPS/sqrt(Hz).
NOISE_DENSITY_DPS_RT_HZ = 3.8e-3
DEFAULT_RATE_DPS = 78.0
DEFAULT_FS_HZ = 145.0
DEFAULT_DURATION_S = 70.0


def default_noise_sigma(fs_hz: float = DEFAULT_FS_HZ) -> float:
    """Per-sample white-noise std for a given sample rate (bandwidth fs/2)."""
    return NOISE_DENSITY_DPS_RT_HZ * math.sqrt(fs_hz / 2.0)


class Orientation(str, enum.Enum):
    UP = "up"
    DOWN = "down"


@dataclass(frozen=True)
class GyroErrorTerms:
    """Ground-truth error terms of one simulated gyro.

    ``scale`` is a fraction (0.00388 is 0.388 %), ``bias`` is in DPS and
    ``noise_sigma`` is the per-sample standard deviation in DPS.
    """

    scale: float
    bias: float
    noise_sigma: float = 0.0

    def __post_init__(self):
        for name in ("scale", "bias", "noise_sigma"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.scale <= -1:
            raise ValueError("scale must be > -1 (gain 1+scale must stay positive)")

    def to_dict(self) -> dict:
        return {"scale": self.scale, "bias": self.bias, "sigma": self.noise_sigma}

    @classmethod
    def from_dict(cls, d: dict) -> "GyroErrorTerms":
        return cls(scale=float(d["scale"]), bias=float(d["bias"]),
                   noise_sigma=float(d.get("sigma", 0.0)))


@dataclass(frozen=True, eq=False)
class Recording:
    samples: np.ndarray
    sample_rate_hz: float
    orientation: Orientation
    true_rate_dps: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("samples must be a non-empty 1-D sequence")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be > 0")
        if not self.true_rate_dps > 0:
            raise ValueError("true_rate_dps is the turntable magnitude and must be > 0")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "orientation", Orientation(self.orientation))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate_hz


@dataclass(frozen=True, eq=False)
class Scenario:
    """Paired up/down recordings taken at the same turntable rate."""

    up: Recording
    down: Recording
    truth: Optional[GyroErrorTerms] = None
    labels: Optional[tuple[float, float]] = None
    id: str = ""

    def __post_init__(self):
        if self.up.orientation is not Orientation.UP:
            raise ValueError("up recording must have orientation UP")
        if self.down.orientation is not Orientation.DOWN:
            raise ValueError("down recording must have orientation DOWN")
        if self.up.true_rate_dps != self.down.true_rate_dps:
            raise ValueError("up and down recordings disagree on the turntable rate")
        if self.up.sample_rate_hz != self.down.sample_rate_hz:
            raise ValueError("up and down recordings disagree on the sample rate")

    @property
    def rate_dps(self) -> float:
        return self.up.true_rate_dps

    @property
    def fs_hz(self) -> float:
        return self.up.sample_rate_hz

    @property
    def duration_s(self) -> float:
        return min(self.up.duration_s, self.down.duration_s)

    def with_labels(self, labels: tuple[float, float]) -> "Scenario":
        return Scenario(self.up, self.down, self.truth, (float(labels[0]), float(labels[1])), self.id)


def apply_error_model(true_sensed_rate, terms: GyroErrorTerms, rng_seed) -> np.ndarray:
    """Return ``(1 + s) * x + b + n`` with ``n ~ N(0, sigma^2)`` from a seeded stream.

    ``rng_seed`` may be an int or a ``numpy.random.SeedSequence``.
    """
    x = np.asarray(true_sensed_rate, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("input must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite values")
    out = (1.0 + terms.scale) * x + terms.bias
    if terms.noise_sigma > 0:
        rng = np.random.default_rng(rng_seed)
        out = out + rng.normal(0.0, terms.noise_sigma, size=x.size)
    return out


def generate_scenario(rate_dps: float, duration_s: float, fs_hz: float,
                      terms: GyroErrorTerms, rng_seed, scenario_id: str = "") -> Scenario:
    if not rate_dps > 0:
        raise ValueError("rate_dps must be > 0")
    if not duration_s > 0:
        raise ValueError("duration_s must be > 0")
    if not fs_hz > 0:
        raise ValueError("fs_hz must be > 0")
    n = int(round(duration_s * fs_hz))
    if n < 1:
        raise ValueError("duration_s * fs_hz yields no samples")
    ss = rng_seed if isinstance(rng_seed, np.random.SeedSequence) else np.random.SeedSequence(rng_seed)
    seed_up, seed_down = ss.spawn(2)
    up = apply_error_model(np.full(n, rate_dps), terms, seed_up)
    down = apply_error_model(np.full(n, -rate_dps), terms, seed_down)
    return Scenario(
        up=Recording(up, fs_hz, Orientation.UP, rate_dps),
        down=Recording(down, fs_hz, Orientation.DOWN, rate_dps),
        truth=terms,
        id=scenario_id,
    )


def sample_error_terms(rng_seed, scale_range: Sequence[float], bias_range: Sequence[float],
                       sigma: float) -> GyroErrorTerms:
    """Draw scale and bias uniformly from closed intervals (point intervals allowed)."""
    draws = []
    rng = np.random.default_rng(rng_seed)
    for name, (lo, hi) in (("scale_range", scale_range), ("bias_range", bias_range)):
        lo, hi = float(lo), float(hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError(f"{name} must be finite")
        if lo > hi:
            raise ValueError(f"{name} is inverted: [{lo}, {hi}]")
        u = rng.random()
        draws.append(lo if lo == hi else lo + (hi - lo) * u)
    return GyroErrorTerms(scale=draws[0], bias=draws[1], noise_sigma=sigma)


# --- CSV / manifest I/O -------------------------------------------------------

CSV_HEADER = ("t_s", "omega_z_dps")


def quantize(values) -> np.ndarray:
    """Round to the 9 significant digits stored in recording CSVs."""
    return np.array([float(f"{v:.9g}") for v in np.asarray(values, dtype=np.float64)])


def write_recording_csv(recording: Recording, path) -> None:
    path = Path(path)
    t = recording.times
    with open(path, "w", newline="") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        for ti, wi in zip(t, recording.samples):
            fh.write(f"{ti:.9g},{wi:.9g}\n")


class RecordingFormatError(ValueError):
    """Malformed recording CSV; message names the file and line."""


def read_recording_csv(path, orientation, true_rate_dps: float,
                       sample_rate_hz: Optional[float] = None) -> Recording:
    """Load a recording CSV.  The sample rate is inferred from ``t_s`` unless given."""
    path = Path(path)
    times, values = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise RecordingFormatError(f"{path}:1: expected header {','.join(CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise RecordingFormatError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                t, w = float(row[0]), float(row[1])
            except ValueError:
                raise RecordingFormatError(f"{path}:{lineno}: non-numeric value {row!r}") from None
            if not (math.isfinite(t) and math.isfinite(w)):
                raise RecordingFormatError(f"{path}:{lineno}: non-finite value {row!r}")
            times.append(t)
            values.append(w)
    if not values:
        raise RecordingFormatError(f"{path}: no samples")
    if sample_rate_hz is None:
        if len(times) < 2:
            raise RecordingFormatError(f"{path}: cannot infer sample rate from one sample")
        dt = (times[-1] - times[0]) / (len(times) - 1)
        if not dt > 0:
            raise RecordingFormatError(f"{path}: timestamps are not increasing")
        sample_rate_hz = float(f"{1.0 / dt:.6g}")
    return Recording(np.array(values), sample_rate_hz, orientation, true_rate_dps)


def scenario_manifest_entry(scenario: Scenario, up_file: str, down_file: str) -> dict:
    return {
        "id": scenario.id,
        "rate_dps": scenario.rate_dps,
        "fs_hz": scenario.fs_hz,
        "up_file": up_file,
        "down_file": down_file,
        "truth": scenario.truth.to_dict() if scenario.truth is not None else None,
        "labels": ({"scale": scenario.labels[0], "bias": scenario.labels[1]}
                   if scenario.labels is not None else None),
    }


def load_scenario(entry: dict, root) -> Scenario:
    """Rebuild a :class:`Scenario` from a manifest entry; file paths are relative to ``root``."""
    root = Path(root)
    rate, fs = float(entry["rate_dps"]), float(entry["fs_hz"])
    up = read_recording_csv(root / entry["up_file"], Orientation.UP, rate, fs)
    down = read_recording_csv(root / entry["down_file"], Orientation.DOWN, rate, fs)
    truth = GyroErrorTerms.from_dict(entry["truth"]) if entry.get("truth") else None
    labels = entry.get("labels")
    labels = (float(labels["scale"]), float(labels["bias"])) if labels else None
    return Scenario(up, down, truth, labels, str(entry.get("id", "")))
