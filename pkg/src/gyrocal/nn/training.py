"""Mini-batch training with early stopping on validation loss."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .functional import loss_rmse100
from .model import Model
from .optim import Adam
from .tensor import Tensor

log = logging.getLogger(__name__)


class TrainingDiverged(ArithmeticError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 32
    epochs: int = 300
    seed: int = 0
    patience: int = 20

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float


@dataclass
class History:
    initial_val_loss: float
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False

    @property
    def best_val_loss(self) -> float:
        if not self.epochs:
            return self.initial_val_loss
        return min(r.val_loss for r in self.epochs)

    def rows(self) -> list[tuple[int, float, float]]:
        return [(r.epoch, r.train_loss, r.val_loss) for r in self.epochs]


def evaluate_loss(model: Model, x: np.ndarray, y: np.ndarray) -> float:
    pred = model.predict(x)
    return float(loss_rmse100(Tensor(pred), y).data)


def train(model: Model, train_set, val_set, hyper: TrainConfig = TrainConfig(),
          progress=None) -> tuple[Model, History]:
    """Fit ``model`` in place and return it with the loss history.

    ``train_set`` and ``val_set`` are ``(inputs [N, 3, W], labels [N, 2])``
    pairs.  Parameters from the epoch with the lowest validation loss are
    restored at the end.
    """
    x_tr, y_tr = (np.asarray(a, dtype=np.float64) for a in train_set)
    x_va, y_va = (np.asarray(a, dtype=np.float64) for a in val_set)
    if len(x_tr) == 0 or len(x_va) == 0:
        raise ValueError("training and validation sets must be non-empty")
    if len(x_tr) != len(y_tr) or len(x_va) != len(y_va):
        raise ValueError("inputs and labels differ in length")

    shuffle_rng = np.random.default_rng([hyper.seed, 2])
    model.reseed_dropout([hyper.seed, 3])
    opt = Adam(model.parameters(), lr=hyper.lr)

    history = History(initial_val_loss=evaluate_loss(model, x_va, y_va))
    best_state, best_val = model.state_dict(), history.initial_val_loss
    stale = 0
    n = len(x_tr)
    for epoch in range(1, hyper.epochs + 1):
        model.train()
        order = shuffle_rng.permutation(n)
        batch_losses = []
        for start in range(0, n, hyper.batch_size):
            idx = order[start:start + hyper.batch_size]
            opt.zero_grad()
            loss = loss_rmse100(model(x_tr[idx]), y_tr[idx])
            value = float(loss.data)
            if not math.isfinite(value):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}, batch starting {start}")
            loss.backward()
            opt.step()
            batch_losses.append(value)
        val = evaluate_loss(model, x_va, y_va)
        if not math.isfinite(val):
            raise TrainingDiverged(f"non-finite validation loss at epoch {epoch}")
        rec = EpochRecord(epoch, float(np.mean(batch_losses)), val)
        history.epochs.append(rec)
        if progress is not None:
            progress(rec)
        if val < best_val:
            best_val, best_state, stale = val, model.state_dict(), 0
            history.best_epoch = epoch
        else:
            stale += 1
            if stale >= hyper.patience:
                history.stopped_early = True
                log.info("early stop at epoch %d (best %d)", epoch, history.best_epoch)
                break
    model.load_state_dict(best_state)
    model.eval()
    return model, history
