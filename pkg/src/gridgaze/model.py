"""Gaze head: a small trainable network from feature tensors to grid cells.

Architecture, fixed: 1x1 convolution to 16 channels (no nonlinearity),
2x2 average pooling with stride 2 (odd edges keep partial windows),
then a dense layer to one logit per grid cell, squashed by a sigmoid.
Each output is an independent per-cell probability, trained with
binary cross-entropy against binary grid vectors.

All tensors are float64. Feature tensors are (channels, height, width)
and batches stack on a leading axis. Training is full manual backprop
with Adam; every function here is deterministic given its seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from gridgaze.backend import kernels
from gridgaze.errors import (
    DimensionMismatchError,
    EmptyDatasetError,
    InconsistentDimsError,
    ShapeMismatchError,
    SpecMismatchError,
)
from gridgaze.grid import GridSpec

HIDDEN_CHANNELS = 16
BCE_EPS = 1e-7


@dataclass(frozen=True)
class ModelParams:
    """Weights of the gaze head.

    conv_w: (16, channels)   conv_b: (16,)
    dense_w: (cells, flat)   dense_b: (cells,)
    """

    conv_w: np.ndarray
    conv_b: np.ndarray
    dense_w: np.ndarray
    dense_b: np.ndarray
    in_channels: int
    in_height: int
    in_width: int
    grid: GridSpec

    @property
    def pooled_shape(self) -> tuple[int, int]:
        return math.ceil(self.in_height / 2), math.ceil(self.in_width / 2)

    @property
    def flat_size(self) -> int:
        ph, pw = self.pooled_shape
        return HIDDEN_CHANNELS * ph * pw

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return self.conv_w, self.conv_b, self.dense_w, self.dense_b


@dataclass(frozen=True)
class AdamState:
    """First/second moment accumulators and step counter, one pair per
    parameter array, in ModelParams.arrays() order."""

    m: tuple[np.ndarray, ...]
    v: tuple[np.ndarray, ...]
    step: int = 0


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 40
    base_lr: float = 0.01
    lr_decay: float = 0.1
    decay_every: int = 10
    batch_size: int = 32
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8


@dataclass
class EpochStats:
    epoch: int
    lr: float
    loss: float


def count_params(channels: int, height: int, width: int, spec: GridSpec) -> int:
    """Total scalar parameters for the given input dims and grid."""
    ph, pw = math.ceil(height / 2), math.ceil(width / 2)
    flat = HIDDEN_CHANNELS * ph * pw
    conv = HIDDEN_CHANNELS * channels + HIDDEN_CHANNELS
    dense = spec.cells * flat + spec.cells
    return conv + dense


def init_params(channels: int, height: int, width: int, spec: GridSpec,
                seed: int = 0) -> ModelParams:
    """Uniform +-sqrt(1 / fan_in) weights, zero biases."""
    if channels < 1 or height < 1 or width < 1:
        raise DimensionMismatchError(
            f"input dims must be >= 1, got ({channels}, {height}, {width})")
    rng = np.random.default_rng(seed)
    bound_conv = math.sqrt(1.0 / channels)
    conv_w = rng.uniform(-bound_conv, bound_conv, size=(HIDDEN_CHANNELS, channels))
    conv_b = np.zeros(HIDDEN_CHANNELS, dtype=np.float64)
    ph, pw = math.ceil(height / 2), math.ceil(width / 2)
    flat = HIDDEN_CHANNELS * ph * pw
    bound_dense = math.sqrt(1.0 / flat)
    dense_w = rng.uniform(-bound_dense, bound_dense, size=(spec.cells, flat))
    dense_b = np.zeros(spec.cells, dtype=np.float64)
    return ModelParams(conv_w, conv_b, dense_w, dense_b,
                       channels, height, width, spec)


def _check_batch(params: ModelParams, batch: np.ndarray) -> np.ndarray:
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim == 3:
        x = x[None]
    expect = (params.in_channels, params.in_height, params.in_width)
    if x.ndim != 4 or x.shape[1:] != expect:
        raise DimensionMismatchError(
            f"batch shape {x.shape} incompatible with input dims {expect}")
    return np.ascontiguousarray(x)


def forward(params: ModelParams, batch: np.ndarray) -> np.ndarray:
    """Per-cell probabilities, shape (batch, cells)."""
    x = _check_batch(params, batch)
    probs, _ = kernels.head_forward(x, *params.arrays())
    return probs


def forward_cached(params: ModelParams, batch: np.ndarray):
    """forward plus the flattened pooled activations needed by backward."""
    x = _check_batch(params, batch)
    probs, flat = kernels.head_forward(x, *params.arrays())
    return probs, flat


def bce_loss(probs: np.ndarray, targets: np.ndarray) -> float:
    """Binary cross-entropy, mean over every cell of every sample.
    Probabilities are clamped to [eps, 1 - eps] before the logs."""
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if p.shape != y.shape:
        raise SpecMismatchError(f"probs {p.shape} vs targets {y.shape}")
    pc = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    return float(np.mean(-(y * np.log(pc) + (1.0 - y) * np.log1p(-pc))))


def backward(params: ModelParams, batch: np.ndarray, probs: np.ndarray,
             flat: np.ndarray, targets: np.ndarray) -> tuple[np.ndarray, ...]:
    """Gradients of the mean BCE loss, in ModelParams.arrays() order.

    Uses the unclamped sigmoid outputs: d loss / d logit collapses to
    (p - y) / (cells * batch), so no log is ever taken here.
    """
    x = _check_batch(params, batch)
    y = np.ascontiguousarray(np.asarray(targets, dtype=np.float64))
    if y.shape != probs.shape:
        raise DimensionMismatchError(f"targets {y.shape} vs probs {probs.shape}")
    return kernels.head_backward(x, probs, flat, y, params.dense_w)


def init_adam(params: ModelParams) -> AdamState:
    zeros = tuple(np.zeros_like(a) for a in params.arrays())
    return AdamState(m=zeros, v=tuple(np.zeros_like(a) for a in params.arrays()),
                     step=0)


def adam_step(params: ModelParams, grads: tuple[np.ndarray, ...],
              state: AdamState, lr: float,
              config: TrainConfig) -> tuple[ModelParams, AdamState]:
    """One Adam update; returns new params and state, inputs untouched.

    update = lr * m_hat / (sqrt(v_hat) + eps), eps outside the root.
    """
    t = state.step + 1
    b1, b2, eps = config.beta1, config.beta2, config.adam_eps
    new_m, new_v, new_arrays = [], [], []
    for a, g, m, v in zip(params.arrays(), grads, state.m, state.v):
        if g.shape != a.shape or m.shape != a.shape or v.shape != a.shape:
            raise ShapeMismatchError(
                f"gradient/moment shape {g.shape} vs param {a.shape}")
        m1 = b1 * m + (1.0 - b1) * g
        v1 = b2 * v + (1.0 - b2) * (g * g)
        m_hat = m1 / (1.0 - b1 ** t)
        v_hat = v1 / (1.0 - b2 ** t)
        new_arrays.append(a - lr * m_hat / (np.sqrt(v_hat) + eps))
        new_m.append(m1)
        new_v.append(v1)
    cw, cb, dw, db = new_arrays
    return (replace(params, conv_w=cw, conv_b=cb, dense_w=dw, dense_b=db),
            AdamState(m=tuple(new_m), v=tuple(new_v), step=t))


def lr_schedule(config: TrainConfig, epoch: int) -> float:
    """Step decay: base_lr * lr_decay ** (epoch // decay_every)."""
    return config.base_lr * config.lr_decay ** (epoch // config.decay_every)


def train(features: np.ndarray, targets: np.ndarray, spec: GridSpec,
          config: TrainConfig = TrainConfig(),
          callback=None) -> tuple[ModelParams, list[EpochStats]]:
    """Train a fresh head on (N, c, h, w) features and (N, cells) targets.

    Batch order is reshuffled every epoch from a stream keyed on
    (seed, epoch), so runs with equal inputs are bit-identical.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if x.ndim != 4:
        raise ShapeMismatchError(f"features must be (N, c, h, w), got {x.shape}")
    if x.shape[0] == 0:
        raise EmptyDatasetError("cannot train on an empty dataset")
    if y.ndim != 2 or y.shape[0] != x.shape[0]:
        raise InconsistentDimsError(
            f"targets {y.shape} incompatible with features {x.shape}")
    if y.shape[1] != spec.cells:
        raise InconsistentDimsError(
            f"targets have {y.shape[1]} cells, grid {spec} has {spec.cells}")

    n, c, h, w = x.shape
    params = init_params(c, h, w, spec, seed=config.seed)
    state = init_adam(params)
    history: list[EpochStats] = []

    for epoch in range(config.epochs):
        lr = lr_schedule(config, epoch)
        perm = np.random.default_rng([config.seed, epoch]).permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            xb = np.ascontiguousarray(x[idx])
            yb = np.ascontiguousarray(y[idx])
            probs, flat = forward_cached(params, xb)
            total += bce_loss(probs, yb) * idx.size
            grads = backward(params, xb, probs, flat, yb)
            params, state = adam_step(params, grads, state, lr, config)
        stats = EpochStats(epoch=epoch, lr=lr, loss=total / n)
        history.append(stats)
        if callback is not None:
            callback(stats)
    return params, history


def predict(params: ModelParams, features: np.ndarray,
            batch_size: int = 256) -> np.ndarray:
    """Probabilities for a stack of feature tensors, shape (N, cells)."""
    x = np.asarray(features, dtype=np.float64)
    single = x.ndim == 3
    if single:
        x = x[None]
    out = np.empty((x.shape[0], params.grid.cells), dtype=np.float64)
    for start in range(0, x.shape[0], batch_size):
        out[start:start + batch_size] = forward(params, x[start:start + batch_size])
    return out[0] if single else out
