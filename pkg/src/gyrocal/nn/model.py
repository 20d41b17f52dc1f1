"""Multi-head 2D CNN that maps a ``[3, W]`` window to (scale, bias)."""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import functional as F
from .tensor import Tensor, concat, reshape, take_rows


@dataclass(frozen=True)
class ConvSpec:
    kernel_rows: int
    kernel_cols: int
    out_channels: int


@dataclass(frozen=True)
class PoolSpec:
    rows: int = 1
    cols: int = 4


@dataclass(frozen=True)
class ModelConfig:
    window_len: int = 290
    head_conv: ConvSpec = ConvSpec(2, 15, 16)
    combined_conv: ConvSpec = ConvSpec(2, 7, 32)
    pool: PoolSpec = PoolSpec(1, 4)
    fc_hidden: int = 64
    dropout_p: float = 0.2
    leaky_alpha: float = 0.01
    bn_epsilon: float = 1e-5
    bn_momentum: float = 0.1

    def __post_init__(self):
        if self.head_conv.kernel_rows != 2:
            raise ValueError("head_conv.kernel_rows must be 2 (measurement and GT rows)")
        if not 0 <= self.dropout_p < 1:
            raise ValueError("dropout_p must be in [0, 1)")
        if self.bn_epsilon <= 0:
            raise ValueError("bn_epsilon must be > 0")
        self.feature_shape()  # validates the layer sizes

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        for key, typ in (("head_conv", ConvSpec), ("combined_conv", ConvSpec), ("pool", PoolSpec)):
            if key in d and isinstance(d[key], dict):
                d[key] = typ(**d[key])
        return cls(**d)

    def head_output_shape(self) -> tuple[int, int, int]:
        """(channels, rows, cols) after one head's conv and pool."""
        hc, p = self.head_conv, self.pool
        h, w = 2 - hc.kernel_rows + 1, self.window_len - hc.kernel_cols + 1
        if w < 1:
            raise ValueError("window_len shorter than head kernel")
        if p.rows > h or p.cols > w:
            raise ValueError("pool larger than head conv output")
        return hc.out_channels, h // p.rows, w // p.cols

    def feature_shape(self) -> tuple[int, int, int]:
        """(channels, rows, cols) entering the flatten step."""
        c, h, w = self.head_output_shape()
        h *= 2  # heads stacked along height
        cc, p = self.combined_conv, self.pool
        h, w = h - cc.kernel_rows + 1, w - cc.kernel_cols + 1
        if h < 1 or w < 1:
            raise ValueError("combined kernel larger than concatenated head output")
        if p.rows > h or p.cols > w:
            raise ValueError("pool larger than combined conv output")
        return cc.out_channels, h // p.rows, w // p.cols

    @property
    def n_features(self) -> int:
        return math.prod(self.feature_shape())


class Mode(str, enum.Enum):
    TRAIN = "train"
    EVAL = "eval"


class ConvHead:
    """batch norm -> conv2d -> avg pool -> leaky ReLU."""

    def __init__(self, in_channels: int, spec: ConvSpec, cfg: ModelConfig, rng):
        self.bn = F.BatchNormState(in_channels, cfg.bn_epsilon, cfg.bn_momentum)
        fan_in = in_channels * spec.kernel_rows * spec.kernel_cols
        bound = 1.0 / math.sqrt(fan_in)
        self.weight = Tensor(rng.uniform(-bound, bound,
                                         (spec.out_channels, in_channels, spec.kernel_rows,
                                          spec.kernel_cols)), requires_grad=True)
        self.bias = Tensor(np.zeros(spec.out_channels), requires_grad=True)

    def __call__(self, x: Tensor, cfg: ModelConfig, training: bool) -> Tensor:
        x = F.batch_norm(x, self.bn, training)
        x = F.conv2d_forward(x, self.weight, self.bias)
        x = F.avg_pool(x, cfg.pool.rows, cfg.pool.cols)
        return F.leaky_relu(x, cfg.leaky_alpha)


class Dense:
    def __init__(self, n_in: int, n_out: int, rng):
        bound = 1.0 / math.sqrt(n_in)
        self.weight = Tensor(rng.uniform(-bound, bound, (n_out, n_in)), requires_grad=True)
        self.bias = Tensor(np.zeros(n_out), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return F.fc_forward(x, self.weight, self.bias)


class Model:
    """Up/down conv heads, a combined conv head and a two-layer FC block.

    Input rows: 0 = up measurements, 1 = down measurements, 2 = GT rate.
    Output columns: 0 = scale (fraction), 1 = bias (DPS).
    """

    def __init__(self, config: ModelConfig = ModelConfig(), seed: int = 0):
        self.config = config
        self.seed = seed
        rng = np.random.default_rng(seed)
        cfg = config
        self.up_head = ConvHead(1, cfg.head_conv, cfg, rng)
        self.down_head = ConvHead(1, cfg.head_conv, cfg, rng)
        self.combined_head = ConvHead(cfg.head_conv.out_channels, cfg.combined_conv, cfg, rng)
        self.fc1 = Dense(cfg.n_features, cfg.fc_hidden, rng)
        self.fc2 = Dense(cfg.fc_hidden, 2, rng)
        self.mode = Mode.EVAL
        self._dropout_rng = np.random.default_rng([seed, 1])

    # --- parameter access -----------------------------------------------------

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        out = []
        for name in ("up_head", "down_head", "combined_head"):
            head = getattr(self, name)
            out += [(f"{name}.bn.gamma", head.bn.gamma), (f"{name}.bn.beta", head.bn.beta),
                    (f"{name}.conv.weight", head.weight), (f"{name}.conv.bias", head.bias)]
        for name in ("fc1", "fc2"):
            layer = getattr(self, name)
            out += [(f"{name}.weight", layer.weight), (f"{name}.bias", layer.bias)]
        return out

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def batch_norms(self) -> list[tuple[str, F.BatchNormState]]:
        return [(n, getattr(self, n).bn) for n in ("up_head", "down_head", "combined_head")]

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {n: p.data.copy() for n, p in self.named_parameters()}
        for n, bn in self.batch_norms():
            state[f"{n}.bn.running_mean"] = bn.running_mean.copy()
            state[f"{n}.bn.running_var"] = bn.running_var.copy()
        return state

    def load_state_dict(self, state: dict) -> None:
        for n, p in self.named_parameters():
            arr = np.asarray(state[n], dtype=np.float64)
            if arr.shape != p.shape:
                raise ValueError(f"{n}: shape {arr.shape} != {p.shape}")
            p.data = arr.copy()
        for n, bn in self.batch_norms():
            bn.running_mean = np.asarray(state[f"{n}.bn.running_mean"], dtype=np.float64).copy()
            bn.running_var = np.asarray(state[f"{n}.bn.running_var"], dtype=np.float64).copy()

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def train(self):
        self.mode = Mode.TRAIN
        return self

    def eval(self):
        self.mode = Mode.EVAL
        return self

    def reseed_dropout(self, seed) -> None:
        self._dropout_rng = np.random.default_rng(seed)

    # --- forward --------------------------------------------------------------

    def forward(self, batch) -> Tensor:
        x = batch if isinstance(batch, Tensor) else Tensor(batch)
        cfg = self.config
        if x.data.ndim != 3 or x.shape[1] != 3 or x.shape[2] != cfg.window_len:
            raise ValueError(f"expected input [batch, 3, {cfg.window_len}], got {x.shape}")
        training = self.mode is Mode.TRAIN
        b = x.shape[0]
        up_in = reshape(take_rows(x, [0, 2], axis=1), (b, 1, 2, cfg.window_len))
        down_in = reshape(take_rows(x, [1, 2], axis=1), (b, 1, 2, cfg.window_len))
        up = self.up_head(up_in, cfg, training)
        down = self.down_head(down_in, cfg, training)
        h = self.combined_head(concat([up, down], axis=2), cfg, training)
        h = reshape(h, (b, -1))
        h = F.tanh_act(self.fc1(h))
        h = F.dropout(h, cfg.dropout_p, training, self._dropout_rng)
        return self.fc2(h)

    __call__ = forward

    def predict(self, batch, chunk: int = 256) -> np.ndarray:
        """Eval-mode prediction as a plain array; mode is restored afterwards."""
        prev = self.mode
        self.eval()
        try:
            batch = np.asarray(batch, dtype=np.float64)
            if batch.ndim == 2:
                batch = batch[None]
            outs = [self.forward(batch[i:i + chunk]).data for i in range(0, len(batch), chunk)]
            return np.concatenate(outs, axis=0)
        finally:
            self.mode = prev
