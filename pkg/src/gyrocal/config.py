"""Run configuration shared by the CLI commands.

Stored as indented JSON.  ``RunConfig.from_dict(cfg.to_dict()) == cfg`` holds
for every valid config, and :func:`RunConfig.hash` is embedded in each output
file.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from .nn.model import ModelConfig
from .pipeline import CorpusSpec, config_hash

CONFIG_SCHEMA = "gyrocal.config/1"


@dataclass(frozen=True)
class PipelineConfig:
    segment_s: float = 6.0
    usable_s: float = 48.0
    window_len: int = 290
    stride: int = 174
    split_ratio: float = 0.8


@dataclass(frozen=True)
class TrainingConfig:
    lr: float = 1e-3
    batch_size: int = 32
    epochs: int = 300
    patience: int = 20


@dataclass(frozen=True)
class Seeds:
    corpus: int = 0
    split: int = 0
    training: int = 0


@dataclass(frozen=True)
class Paths:
    corpus_dir: str = "corpus"
    checkpoint: str = "model.json"
    report_dir: str = "report"


@dataclass(frozen=True)
class RunConfig:
    corpus: CorpusSpec = field(default_factory=CorpusSpec)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    seeds: Seeds = field(default_factory=Seeds)
    paths: Paths = field(default_factory=Paths)

    def __post_init__(self):
        if self.model.window_len != self.pipeline.window_len:
            raise ValueError("model.window_len must equal pipeline.window_len")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["corpus"]["scale_range"] = list(self.corpus.scale_range)
        d["corpus"]["bias_range"] = list(self.corpus.bias_range)
        return {"schema": CONFIG_SCHEMA, **d}

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        schema = d.pop("schema", CONFIG_SCHEMA)
        if schema != CONFIG_SCHEMA:
            raise ValueError(f"unsupported config schema {schema!r}")
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")
        corpus = dict(d.get("corpus", {}))
        for key in ("scale_range", "bias_range"):
            if key in corpus:
                corpus[key] = tuple(corpus[key])
        return cls(
            corpus=CorpusSpec(**corpus),
            pipeline=PipelineConfig(**d.get("pipeline", {})),
            model=ModelConfig.from_dict(d.get("model", {})),
            training=TrainingConfig(**d.get("training", {})),
            seeds=Seeds(**d.get("seeds", {})),
            paths=Paths(**d.get("paths", {})),
        )

    def hash(self) -> str:
        return config_hash(self.to_dict())

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def override(self, section: str, **changes) -> "RunConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        if not changes:
            return self
        return replace(self, **{section: replace(getattr(self, section), **changes)})
