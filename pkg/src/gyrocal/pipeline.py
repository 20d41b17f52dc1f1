"""Dataset construction: labelling, segmentation, windowing and splitting.

Each training scenario contributes the first 48 s of both recordings, cut into
8 consecutive 6 s segments; each segment yields 4 windows of 290 samples at a
174-sample stride.  46 scenarios therefore give 46 * 8 * 4 = 1472 windows.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .calibration import calibrate_scenario
from .sensor_model import (GyroErrorTerms, Orientation, Recording, Scenario, default_noise_sigma,
                           generate_scenario, quantize, sample_error_terms,
                           scenario_manifest_entry, write_recording_csv)

SEGMENT_S = 6.0
USABLE_S = 48.0
WINDOW_LEN = 290
STRIDE = 174  # 60 % of the window length

MANIFEST_SCHEMA = "gyrocal.corpus/1"
DATASET_SCHEMA = "gyrocal.dataset/1"


@dataclass(frozen=True, eq=False)
class DataPoint:
    window: np.ndarray  # [3, W]: up, down, GT rate
    label: tuple[float, float]  # (scale fraction, bias DPS)
    scenario_id: str = ""
    segment: int = 0
    index: int = 0

    @property
    def provenance(self) -> tuple[str, int, int]:
        return (self.scenario_id, self.segment, self.index)


@dataclass
class DatasetSplit:
    train: list[DataPoint]
    val: list[DataPoint]
    split_seed: int


@dataclass(frozen=True, eq=False)
class SegmentPair:
    up: np.ndarray
    down: np.ndarray
    rate_dps: float
    label: tuple[float, float]
    scenario_id: str
    segment: int


def label_scenario(scenario: Scenario) -> tuple[float, float]:
    """GT label: baseline calibration over the full recordings."""
    res = calibrate_scenario(scenario, None)
    return (res.scale, res.bias)


def segment_scenario(scenario: Scenario, segment_s: float = SEGMENT_S,
                     usable_s: float = USABLE_S) -> list[SegmentPair]:
    if scenario.labels is None:
        raise ValueError("scenario must be labelled before segmentation")
    if scenario.duration_s + 1e-9 < usable_s:
        raise ValueError(f"scenario {scenario.id!r} is {scenario.duration_s} s, needs {usable_s} s")
    fs = scenario.fs_hz
    seg_len = int(round(segment_s * fs))
    n_seg = int(math.floor(usable_s / segment_s + 1e-9))
    out = []
    for k in range(n_seg):
        lo, hi = k * seg_len, (k + 1) * seg_len
        out.append(SegmentPair(scenario.up.samples[lo:hi], scenario.down.samples[lo:hi],
                               scenario.rate_dps, scenario.labels, scenario.id, k))
    return out


def window_segment(seg: SegmentPair, window_len: int = WINDOW_LEN,
                   stride: int = STRIDE) -> list[DataPoint]:
    n = min(len(seg.up), len(seg.down))
    if n < window_len:
        raise ValueError(f"segment of {n} samples is shorter than window_len={window_len}")
    points = []
    gt_row = np.full(window_len, seg.rate_dps)
    for i, start in enumerate(range(0, n - window_len + 1, stride)):
        window = np.stack([seg.up[start:start + window_len], seg.down[start:start + window_len],
                           gt_row])
        points.append(DataPoint(window, seg.label, seg.scenario_id, seg.segment, i))
    return points


def scenario_datapoints(scenario: Scenario, segment_s: float = SEGMENT_S,
                        usable_s: float = USABLE_S, window_len: int = WINDOW_LEN,
                        stride: int = STRIDE) -> list[DataPoint]:
    return [p for seg in segment_scenario(scenario, segment_s, usable_s)
            for p in window_segment(seg, window_len, stride)]


def build_datapoints(scenarios: Sequence[Scenario], **kwargs) -> list[DataPoint]:
    return [p for sc in scenarios for p in scenario_datapoints(sc, **kwargs)]


def split_train_val(points: Sequence[DataPoint], ratio: float = 0.8, seed: int = 0) -> DatasetSplit:
    """Seeded shuffle, then ``floor(ratio * N)`` points to train and the rest to validation."""
    if len(points) == 0:
        raise ValueError("cannot split an empty dataset")
    order = np.random.default_rng(seed).permutation(len(points))
    n_train = int(math.floor(ratio * len(points) + 1e-9))
    return DatasetSplit([points[i] for i in order[:n_train]],
                        [points[i] for i in order[n_train:]], seed)


def to_arrays(points: Sequence[DataPoint]) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([p.window for p in points])
    y = np.array([p.label for p in points], dtype=np.float64)
    return x, y


# --- synthetic corpus ---------------------------------------------------------

@dataclass(frozen=True)
class CorpusSpec:
    n_scenarios: int = 48
    n_test: int = 2
    rate_dps: float = 78.0
    fs_hz: float = 145.0
    duration_s: float = 70.0
    scale_range: tuple[float, float] = (0.003, 0.005)
    bias_range: tuple[float, float] = (-0.1, 0.0)
    noise_sigma: float = field(default_factory=default_noise_sigma)

    def __post_init__(self):
        if self.n_scenarios < 1:
            raise ValueError("n_scenarios must be >= 1")
        if not 0 <= self.n_test < self.n_scenarios:
            raise ValueError("n_test must leave at least one training scenario")


def config_hash(obj) -> str:
    """Short sha256 of the canonical JSON form of ``obj``."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _quantized_copy(sc: Scenario) -> Scenario:
    # labels must be computed from exactly what lands in the CSV files
    up = Recording(quantize(sc.up.samples), sc.fs_hz, Orientation.UP, sc.rate_dps)
    down = Recording(quantize(sc.down.samples), sc.fs_hz, Orientation.DOWN, sc.rate_dps)
    return Scenario(up, down, sc.truth, None, sc.id)


def generate_corpus(spec: CorpusSpec, seed: int) -> list[Scenario]:
    """Labelled scenarios in generation order; the last ``spec.n_test`` are held out."""
    children = np.random.SeedSequence(seed).spawn(spec.n_scenarios)

    def one(i):
        terms_seed, noise_seed = children[i].spawn(2)
        terms = sample_error_terms(terms_seed, spec.scale_range, spec.bias_range, spec.noise_sigma)
        sc = generate_scenario(spec.rate_dps, spec.duration_s, spec.fs_hz, terms, noise_seed,
                               scenario_id=f"S{i:03d}")
        sc = _quantized_copy(sc)
        return sc.with_labels(label_scenario(sc))

    with ThreadPoolExecutor() as pool:
        return list(pool.map(one, range(spec.n_scenarios)))


def split_names(spec: CorpusSpec) -> list[str]:
    n_train = spec.n_scenarios - spec.n_test
    return ["train"] * n_train + ["test"] * spec.n_test


def build_synthetic_corpus(n_scenarios: int = 48, term_ranges: Optional[dict] = None,
                           seed: int = 0, out_dir=None, *, spec: Optional[CorpusSpec] = None,
                           extra: Optional[dict] = None) -> tuple[list[Scenario], dict]:
    """Generate a labelled corpus, optionally writing CSVs and ``manifest.json`` to ``out_dir``.

    ``term_ranges`` may hold ``scale_range``, ``bias_range`` and ``noise_sigma``.
    Returns the scenarios and the manifest dict.
    """
    if spec is None:
        spec = CorpusSpec(n_scenarios=n_scenarios, **(term_ranges or {}))
    scenarios = generate_corpus(spec, seed)
    spec_doc = {
        "n_scenarios": spec.n_scenarios, "n_test": spec.n_test, "rate_dps": spec.rate_dps,
        "fs_hz": spec.fs_hz, "duration_s": spec.duration_s,
        "scale_range": list(spec.scale_range), "bias_range": list(spec.bias_range),
        "noise_sigma": spec.noise_sigma,
    }
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "seed": seed,
        "corpus": spec_doc,
        "config_hash": config_hash({"corpus": spec_doc, "seed": seed, **(extra or {})}),
        "scenarios": [],
    }
    if extra:
        manifest.update(extra)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        try:
            (out / "recordings").mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OSError(f"cannot create corpus directory {out}: {exc}") from exc
    for sc, split in zip(scenarios, split_names(spec)):
        up_file, down_file = f"recordings/{sc.id}_up.csv", f"recordings/{sc.id}_down.csv"
        if out is not None:
            for rec, name in ((sc.up, up_file), (sc.down, down_file)):
                try:
                    write_recording_csv(rec, out / name)
                except OSError as exc:
                    raise OSError(f"cannot write {out / name}: {exc}") from exc
        entry = scenario_manifest_entry(sc, up_file, down_file)
        entry["split"] = split
        manifest["scenarios"].append(entry)
    if out is not None:
        write_json(manifest, out / "manifest.json")
    return scenarios, manifest


def write_json(doc: dict, path) -> None:
    path = Path(path)
    try:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def load_corpus(corpus_dir) -> tuple[dict, list[Scenario], list[Scenario]]:
    """Read ``manifest.json``; returns (manifest, train scenarios, test scenarios)."""
    from .sensor_model import load_scenario

    root = Path(corpus_dir)
    with open(root / "manifest.json") as fh:
        manifest = json.load(fh)
    if manifest.get("schema") != MANIFEST_SCHEMA:
        raise ValueError(f"{root / 'manifest.json'}: unsupported schema {manifest.get('schema')!r}")
    train, test = [], []
    for entry in manifest["scenarios"]:
        sc = load_scenario(entry, root)
        (test if entry.get("split") == "test" else train).append(sc)
    return manifest, train, test


# --- dataset files ------------------------------------------------------------

def save_datapoints(points: Sequence[DataPoint], path, extra: Optional[dict] = None) -> None:
    """Write ``<path>.npy`` (float64 ``[N, 3, W]`` tensor) and ``<path>.json`` index sidecar."""
    path = Path(path)
    x, y = to_arrays(points)
    np.save(path.with_suffix(".npy"), x)
    index = {
        "schema": DATASET_SCHEMA,
        "shape": list(x.shape),
        "dtype": "float64",
        "rows": ["up_dps", "down_dps", "gt_rate_dps"],
        "points": [{"scenario": p.scenario_id, "segment": p.segment, "window": p.index,
                    "scale": p.label[0], "bias": p.label[1]} for p in points],
    }
    if extra:
        index.update(extra)
    write_json(index, path.with_suffix(".json"))


def load_datapoints(path) -> list[DataPoint]:
    path = Path(path)
    with open(path.with_suffix(".json")) as fh:
        index = json.load(fh)
    if index.get("schema") != DATASET_SCHEMA:
        raise ValueError(f"{path}: unsupported dataset schema {index.get('schema')!r}")
    x = np.load(path.with_suffix(".npy"))
    if list(x.shape) != index["shape"]:
        raise ValueError(f"{path}: tensor shape {x.shape} disagrees with index {index['shape']}")
    return [DataPoint(x[i], (e["scale"], e["bias"]), e["scenario"], e["segment"], e["window"])
            for i, e in enumerate(index["points"])]
