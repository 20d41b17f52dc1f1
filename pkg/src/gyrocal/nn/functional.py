"""Differentiable layer operations.

All image-like tensors are ``[batch, channels, height, width]``.  Convolution
is valid-padding, stride 1, and computes a cross-correlation (the usual deep
learning convention): ``out[i, j] = sum_ab w[a, b] * x[i + a, j + b] + bias``.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor, make


def fc_forward(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Dense layer ``z = x @ W.T + b`` with ``W`` of shape ``[n_out, n_in]``."""
    if x.data.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ValueError(f"fc input {x.shape} does not match weight {weight.shape}")

    def backward(g):
        return g @ weight.data, g.T @ x.data, g.sum(axis=0)

    return make(x.data @ weight.data.T + bias.data, (x, weight, bias), backward)


def conv2d_forward(x: Tensor, kernels: Tensor, biases: Tensor) -> Tensor:
    if x.data.ndim != 4 or kernels.data.ndim != 4:
        raise ValueError("conv2d expects 4-D input and kernels")
    b, cin, h, w = x.shape
    cout, kcin, n, m = kernels.shape
    if kcin != cin:
        raise ValueError(f"kernel expects {kcin} input channels, input has {cin}")
    if n > h or m > w:
        raise ValueError(f"kernel {n}x{m} larger than input {h}x{w}")
    ho, wo = h - n + 1, w - m + 1
    # im2col: rows are output positions (b, i, j), columns are (cin, a, c)
    cols = sliding_window_view(x.data, (n, m), axis=(2, 3)).transpose(0, 2, 3, 1, 4, 5)
    cols = cols.reshape(b * ho * wo, cin * n * m)
    kmat = kernels.data.reshape(cout, cin * n * m)
    out = (cols @ kmat.T).reshape(b, ho, wo, cout).transpose(0, 3, 1, 2)
    out = out + biases.data[None, :, None, None]

    def backward(g):
        gflat = g.transpose(0, 2, 3, 1).reshape(b * ho * wo, cout)
        gk = (gflat.T @ cols).reshape(kernels.shape)
        gb = g.sum(axis=(0, 2, 3))
        if not x.requires_grad:
            return None, gk, gb
        dcols = (gflat @ kmat).reshape(b, ho, wo, cin, n, m)
        dcols = np.ascontiguousarray(dcols.transpose(4, 5, 0, 3, 1, 2))  # [n, m, b, cin, ho, wo]
        gx = np.zeros_like(x.data)
        for a in range(n):
            for c in range(m):
                gx[:, :, a:a + ho, c:c + wo] += dcols[a, c]
        return gx, gk, gb

    return make(np.ascontiguousarray(out), (x, kernels, biases), backward)


def avg_pool(x: Tensor, rows: int, cols: int) -> Tensor:
    """Non-overlapping mean pooling; trailing rows/columns that do not fill a block are dropped."""
    b, c, h, w = x.shape
    if rows > h or cols > w:
        raise ValueError(f"pool {rows}x{cols} larger than input {h}x{w}")
    ho, wo = h // rows, w // cols
    cropped = x.data[:, :, :ho * rows, :wo * cols]
    out = cropped.reshape(b, c, ho, rows, wo, cols).mean(axis=(3, 5))

    def backward(g):
        gx = np.zeros_like(x.data)
        expanded = np.repeat(np.repeat(g, rows, axis=2), cols, axis=3) / (rows * cols)
        gx[:, :, :ho * rows, :wo * cols] = expanded
        return (gx,)

    return make(out, (x,), backward)


def leaky_relu(x: Tensor, alpha: float) -> Tensor:
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    slope = np.where(x.data >= 0, 1.0, alpha)
    return make(x.data * slope, (x,), lambda g: (g * slope,))


def tanh_act(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return make(y, (x,), lambda g: (g * (1.0 - y * y),))


class BatchNormState:
    """Learnable scale/shift plus running statistics for one batch-norm layer."""

    def __init__(self, channels: int, eps: float = 1e-5, momentum: float = 0.1):
        if eps <= 0:
            raise ValueError("eps must be > 0")
        self.gamma = Tensor(np.ones(channels), requires_grad=True)
        self.beta = Tensor(np.zeros(channels), requires_grad=True)
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self.eps = eps
        self.momentum = momentum


def batch_norm(x: Tensor, state: BatchNormState, training: bool) -> Tensor:
    """Per-channel normalisation over ``(batch, H, W)``.

    Training mode uses batch statistics (biased variance for normalisation)
    and blends them into the running estimates; eval mode uses the running
    estimates and is a fixed affine map.
    """
    b, c, h, w = x.shape
    gamma = state.gamma.data[None, :, None, None]
    beta = state.beta.data[None, :, None, None]
    if not training:
        inv = 1.0 / np.sqrt(state.running_var + state.eps)[None, :, None, None]
        xhat = (x.data - state.running_mean[None, :, None, None]) * inv

        def backward_eval(g):
            return g * gamma * inv, (g * xhat).sum(axis=(0, 2, 3)), g.sum(axis=(0, 2, 3))

        return make(xhat * gamma + beta, (x, state.gamma, state.beta), backward_eval)

    count = b * h * w
    if count < 2:
        raise ValueError("batch norm in training mode needs at least 2 values per channel")
    mu = x.data.mean(axis=(0, 2, 3))
    centered = x.data - mu[None, :, None, None]
    var = (centered ** 2).mean(axis=(0, 2, 3))
    inv = 1.0 / np.sqrt(var + state.eps)
    xhat = centered * inv[None, :, None, None]

    mom = state.momentum
    state.running_mean = (1 - mom) * state.running_mean + mom * mu
    state.running_var = (1 - mom) * state.running_var + mom * var * count / (count - 1)

    def backward(g):
        gxhat = g * gamma
        gx = (inv[None, :, None, None] / count) * (
            count * gxhat
            - gxhat.sum(axis=(0, 2, 3), keepdims=True)
            - xhat * (gxhat * xhat).sum(axis=(0, 2, 3), keepdims=True)
        )
        return gx, (g * xhat).sum(axis=(0, 2, 3)), g.sum(axis=(0, 2, 3))

    return make(xhat * gamma + beta, (x, state.gamma, state.beta), backward)


def dropout(x: Tensor, p: float, training: bool, rng) -> Tensor:
    """Inverted dropout: zero with probability ``p``, scale survivors by ``1/(1-p)``.

    ``rng`` is a ``numpy.random.Generator`` or a seed.
    """
    if not 0 <= p < 1:
        raise ValueError("dropout probability must be in [0, 1)")
    if not training or p == 0:
        return x
    rng = np.random.default_rng(rng)
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return make(x.data * mask, (x,), lambda g: (g * mask,))


def loss_rmse100(pred: Tensor, target) -> Tensor:
    """``100 * sqrt(mean((pred - target)**2))`` over every element."""
    target = np.asarray(target.data if isinstance(target, Tensor) else target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"pred {pred.shape} and target {target.shape} differ")
    if pred.data.size == 0:
        raise ValueError("empty batch")
    diff = pred.data - target
    n = diff.size
    rmse = np.sqrt(np.mean(diff * diff))

    def backward(g):
        if rmse == 0:
            return (np.zeros_like(diff),)
        return (g * 100.0 * diff / (n * rmse),)

    return make(np.array(100.0 * rmse), (pred,), backward)
