"""JSON checkpoints.

Floats are written with ``repr`` precision, so a save/load round trip is
exact and eval outputs of the reloaded model are bit-identical.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import numpy as np

from .model import Model, ModelConfig

SCHEMA = "gyrocal.checkpoint/1"


def checkpoint_dict(model: Model, train_seed: Optional[int] = None, extra: Optional[dict] = None) -> dict:
    params = {k: {"shape": list(v.shape), "values": v.ravel().tolist()}
              for k, v in model.state_dict().items()}
    out = {
        "schema": SCHEMA,
        "config": model.config.to_dict(),
        "init_seed": model.seed,
        "train_seed": train_seed,
        "parameters": params,
    }
    if extra:
        out.update(extra)
    return out


def save_checkpoint(model: Model, path, train_seed: Optional[int] = None,
                    extra: Optional[dict] = None) -> None:
    with open(Path(path), "w") as fh:
        json.dump(checkpoint_dict(model, train_seed, extra), fh, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path) -> tuple[Model, dict]:
    """Return the model (in eval mode) and the raw checkpoint metadata."""
    with open(Path(path)) as fh:
        doc = json.load(fh)
    if doc.get("schema") != SCHEMA:
        raise ValueError(f"{path}: unsupported checkpoint schema {doc.get('schema')!r}")
    model = Model(ModelConfig.from_dict(doc["config"]), seed=int(doc.get("init_seed", 0)))
    state = {k: np.asarray(v["values"], dtype=np.float64).reshape(v["shape"])
             for k, v in doc["parameters"].items()}
    model.load_state_dict(state)
    model.eval()
    meta = {k: v for k, v in doc.items() if k != "parameters"}
    return model, meta
