"""
Dense numeric core.

Tensors are plain float64 numpy arrays. Every layer primitive comes as a
``*_forward`` function returning ``(out, cache)`` and a ``*_backward``
function mapping an upstream gradient (plus the cache) to input gradients.
Parameter gradients are accumulated into ``Parameter.grad``.

Temporal tensors are laid out batch x time x channels.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from .errors import DataError, ParameterError, ShapeError

DTYPE = np.float64


def as_tensor(x) -> np.ndarray:
    return np.require(x, dtype=DTYPE, requirements="C")


class Parameter:
    """A learnable tensor with its gradient accumulator.

    ``kind`` is one of ``conv``, ``bn`` or ``dense`` and decides whether the
    L1 penalty applies during :class:`SGD` steps.
    """

    def __init__(self, value, name: str, kind: str = "conv"):
        self.value = as_tensor(value).copy()
        self.grad = np.zeros_like(self.value)
        self.name = name
        self.kind = kind

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad[...] = 0.0

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.value.shape}, kind={self.kind!r})"


def he_normal(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    return rng.normal(0.0, math.sqrt(2.0 / fan_in), size=shape)


# ---------------------------------------------------------------------------
# conv1d
# ---------------------------------------------------------------------------


def conv_output_length(T: int, f: int, stride: int, padding: str) -> tuple[int, int, int]:
    """Return ``(pad_left, pad_right, T_out)`` for a temporal convolution."""
    if stride <= 0:
        raise ParameterError(f"stride must be positive, got {stride}")
    if padding == "same":
        T_out = -(-T // stride)
        total = max((T_out - 1) * stride + f - T, 0)
        left = total // 2
        return left, total - left, T_out
    if padding == "valid":
        if f > T:
            raise ShapeError(f"filter length {f} exceeds input length {T} with valid padding")
        return 0, 0, (T - f) // stride + 1
    raise ParameterError(f"unknown padding mode {padding!r}")


def conv1d_forward(x, filters, stride: int = 1, padding: str = "same"):
    x = as_tensor(x)
    w = as_tensor(filters)
    if x.ndim != 3 or w.ndim != 3:
        raise ShapeError(f"conv1d expects B x T x C input and N x f x C filters, got {x.shape}, {w.shape}")
    B, T, C = x.shape
    N, f, Cw = w.shape
    if Cw != C:
        raise ShapeError(f"filter channels {Cw} != input channels {C}")
    left, right, T_out = conv_output_length(T, f, stride, padding)
    xp = np.pad(x, ((0, 0), (left, right), (0, 0))) if (left or right) else x
    s0, s1, s2 = xp.strides
    cols = np.lib.stride_tricks.as_strided(
        xp, shape=(B, T_out, f, C), strides=(s0, s1 * stride, s1, s2), writeable=False
    ).reshape(B * T_out, f * C)
    out = (cols @ w.reshape(N, f * C).T).reshape(B, T_out, N)
    return out, (x.shape, xp.shape, left, cols, w, stride)


def conv1d_backward(dout, cache):
    """Gradients of a temporal convolution w.r.t. its input and filters."""
    x_shape, xp_shape, left, cols, w, stride = cache
    B, T, C = x_shape
    N, f, _ = w.shape
    T_out = dout.shape[1]
    d2 = dout.reshape(B * T_out, N)
    dw = (d2.T @ cols).reshape(N, f, C)
    dcols = (d2 @ w.reshape(N, f * C)).reshape(B, T_out, f, C)
    dxp = np.zeros(xp_shape)
    stop = stride * (T_out - 1) + 1
    for k in range(f):
        dxp[:, k:k + stop:stride, :] += dcols[:, :, k, :]
    return dxp[:, left:left + T, :], dw


def conv1d(x, filters, stride: int = 1, padding: str = "same") -> np.ndarray:
    """Temporal cross-correlation without bias.

    ``same`` zero-pads so the output has ``ceil(T / stride)`` frames; odd
    padding puts the extra zero at the trailing end.
    """
    return conv1d_forward(x, filters, stride, padding)[0]


# ---------------------------------------------------------------------------
# batch normalization
# ---------------------------------------------------------------------------


class BatchNorm:
    """Per-channel batch normalization over the batch and time axes."""

    def __init__(self, channels: int, name: str = "bn", epsilon: float = 1e-5, momentum: float = 0.9):
        if not 0.0 < momentum < 1.0:
            raise ParameterError("batchnorm momentum must lie in (0, 1)")
        if epsilon <= 0:
            raise ParameterError("batchnorm epsilon must be positive")
        self.scale = Parameter(np.ones(channels), f"{name}.scale", "bn")
        self.shift = Parameter(np.zeros(channels), f"{name}.shift", "bn")
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self.epsilon = epsilon
        self.momentum = momentum
        self.name = name

    @property
    def channels(self) -> int:
        return self.scale.value.shape[0]

    def parameters(self):
        return [self.scale, self.shift]

    def buffers(self):
        return {f"{self.name}.running_mean": self.running_mean, f"{self.name}.running_var": self.running_var}

    def forward(self, x, mode: str = "train"):
        x = as_tensor(x)
        if x.ndim != 3 or x.shape[2] != self.channels:
            raise ShapeError(f"{self.name}: expected B x T x {self.channels}, got {x.shape}")
        if mode == "train":
            m = x.shape[0] * x.shape[1]
            if m == 0:
                raise ParameterError(f"{self.name}: empty batch-time extent")
            mean = x.mean(axis=(0, 1))
            var = x.var(axis=(0, 1))
            inv_std = 1.0 / np.sqrt(var + self.epsilon)
            xhat = (x - mean) * inv_std
            self.running_mean *= self.momentum
            self.running_mean += (1.0 - self.momentum) * mean
            self.running_var *= self.momentum
            self.running_var += (1.0 - self.momentum) * var
            cache = ("train", xhat, inv_std)
        elif mode == "eval":
            inv_std = 1.0 / np.sqrt(self.running_var + self.epsilon)
            xhat = (x - self.running_mean) * inv_std
            cache = ("eval", xhat, inv_std)
        else:
            raise ParameterError(f"unknown mode {mode!r}")
        return xhat * self.scale.value + self.shift.value, cache

    def backward(self, dout, cache):
        mode, xhat, inv_std = cache
        self.scale.grad += (dout * xhat).sum(axis=(0, 1))
        self.shift.grad += dout.sum(axis=(0, 1))
        dxhat = dout * self.scale.value
        if mode == "eval":
            return dxhat * inv_std
        m = dout.shape[0] * dout.shape[1]
        return (inv_std / m) * (
            m * dxhat - dxhat.sum(axis=(0, 1)) - xhat * (dxhat * xhat).sum(axis=(0, 1))
        )


def batchnorm(x, state: BatchNorm, mode: str = "train") -> np.ndarray:
    return state.forward(x, mode)[0]


# ---------------------------------------------------------------------------
# pointwise ops, pooling, head
# ---------------------------------------------------------------------------


def relu_forward(x):
    x = as_tensor(x)
    mask = x > 0
    return np.where(mask, x, 0.0), mask


def relu_backward(dout, mask):
    return np.where(mask, dout, 0.0)


def relu(x) -> np.ndarray:
    return relu_forward(x)[0]


def dropout_forward(x, p: float, mode: str = "train", seed=None):
    """Inverted dropout; returns ``(out, mask)`` where mask is None in eval mode."""
    if not 0.0 <= p < 1.0:
        raise ParameterError(f"dropout probability must lie in [0, 1), got {p}")
    x = as_tensor(x)
    if mode == "eval" or p == 0.0:
        return x, None
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return x * mask, mask


def dropout_backward(dout, mask):
    return dout if mask is None else dout * mask


def dropout(x, p: float, mode: str = "train", seed=None) -> np.ndarray:
    return dropout_forward(x, p, mode, seed)[0]


def global_average_pool(x) -> np.ndarray:
    x = as_tensor(x)
    if x.ndim != 3 or x.shape[1] < 1:
        raise ShapeError(f"global_average_pool expects B x T x C with T >= 1, got {x.shape}")
    return x.mean(axis=1)


def global_average_pool_backward(dout, T: int):
    return np.repeat(dout[:, None, :] / T, T, axis=1)


def softmax(logits) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _check_labels(labels, K):
    labels = np.asarray(labels)
    if labels.ndim != 1 or not np.issubdtype(labels.dtype, np.integer):
        labels = labels.astype(np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= K):
        raise DataError(f"labels must lie in [0, {K}), got range [{labels.min()}, {labels.max()}]")
    return labels


def dense_softmax_xent(x, weights: Parameter, bias: Parameter, labels):
    """Affine map, softmax and mean cross-entropy. Returns ``(loss, probs)``."""
    loss, probs, _ = dense_softmax_xent_forward(x, weights, bias, labels)
    return loss, probs


def dense_softmax_xent_forward(x, weights: Parameter, bias: Parameter, labels):
    x = as_tensor(x)
    K = weights.value.shape[1]
    labels = _check_labels(labels, K)
    logits = x @ weights.value + bias.value
    z = logits - logits.max(axis=1, keepdims=True)
    log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    probs = np.exp(log_probs)
    B = x.shape[0]
    loss = -log_probs[np.arange(B), labels].mean()
    return float(loss), probs, (x, labels)


def dense_softmax_xent_backward(probs, cache, weights: Parameter, bias: Parameter):
    """Accumulate head gradients and return the gradient w.r.t. the pooled input."""
    x, labels = cache
    B = x.shape[0]
    dlogits = probs.copy()
    dlogits[np.arange(B), labels] -= 1.0
    dlogits /= B
    weights.grad += x.T @ dlogits
    bias.grad += dlogits.sum(axis=0)
    return dlogits @ weights.value.T


# ---------------------------------------------------------------------------
# optimizer and schedule
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SGDConfig:
    learning_rate: float = 0.01
    momentum: float = 0.0
    l1_weight: float = 1e-4
    plateau_patience: int = 5
    plateau_factor: float = 0.1
    min_delta: float = 1e-3

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ParameterError("learning_rate must be positive")
        if self.momentum < 0 or self.l1_weight < 0 or self.min_delta < 0:
            raise ParameterError("momentum, l1_weight and min_delta must be non-negative")
        if self.plateau_patience < 1:
            raise ParameterError("plateau_patience must be a positive integer")
        if not 0.0 < self.plateau_factor < 1.0:
            raise ParameterError("plateau_factor must lie in (0, 1)")


class SGD:
    """Momentum SGD with an L1 penalty restricted to convolution parameters.

    Update: ``v <- momentum * v - lr * g``, ``w <- w + v`` where for conv
    parameters ``g = grad + l1_weight * sign(w)``.
    """

    def __init__(self, params: Iterable[Parameter], cfg: SGDConfig):
        self.params = list(params)
        self.cfg = cfg
        self.lr = cfg.learning_rate
        self.velocity = [np.zeros_like(p.value) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        cfg = self.cfg
        for p, v in zip(self.params, self.velocity):
            g = p.grad
            if p.kind == "conv" and cfg.l1_weight:
                g = g + cfg.l1_weight * np.sign(p.value)
            v *= cfg.momentum
            v -= self.lr * g
            p.value += v


def sgd_step(params: Sequence[Parameter], cfg: SGDConfig, optimizer: SGD | None = None) -> SGD:
    """Apply one update to ``params``; pass the returned optimizer back in to keep momentum."""
    if optimizer is None:
        optimizer = SGD(params, cfg)
    optimizer.step()
    return optimizer


def plateau_schedule(history: Sequence[float], cfg: SGDConfig) -> float:
    """Learning rate after replaying the reduce-on-plateau rule over ``history``.

    A loss counts as an improvement only when it beats the best loss so far
    by more than ``min_delta``. After ``plateau_patience`` epochs without
    improvement the rate is multiplied by ``plateau_factor`` and the counter
    restarts.
    """
    if len(history) == 0:
        raise ParameterError("plateau_schedule needs a non-empty loss history")
    lr = cfg.learning_rate
    best = math.inf
    wait = 0
    for loss in history:
        if loss < best - cfg.min_delta:
            best = loss
            wait = 0
        else:
            wait += 1
            if wait >= cfg.plateau_patience:
                lr *= cfg.plateau_factor
                wait = 0
    return lr


# ---------------------------------------------------------------------------
# binary tensor format
# ---------------------------------------------------------------------------


def write_tensor(fp: BinaryIO, x) -> None:
    """Rank, extents (u64 LE), then data (f64 LE, row-major)."""
    x = as_tensor(x)
    fp.write(struct.pack("<Q", x.ndim))
    fp.write(struct.pack(f"<{x.ndim}Q", *x.shape))
    fp.write(x.astype("<f8").tobytes())


def read_tensor(fp: BinaryIO) -> np.ndarray:
    head = fp.read(8)
    if len(head) != 8:
        raise DataError("truncated tensor header")
    (rank,) = struct.unpack("<Q", head)
    raw = fp.read(8 * rank)
    if len(raw) != 8 * rank:
        raise DataError("truncated tensor extents")
    shape = struct.unpack(f"<{rank}Q", raw)
    n = int(np.prod(shape, dtype=np.int64))
    data = fp.read(8 * n)
    if len(data) != 8 * n:
        raise DataError(f"tensor data truncated: expected {n} values")
    return np.frombuffer(data, dtype="<f8").astype(DTYPE).reshape(shape)


def save_tensor(path, x) -> None:
    with open(path, "wb") as fp:
        write_tensor(fp, x)


def load_tensor(path) -> np.ndarray:
    with open(path, "rb") as fp:
        return read_tensor(fp)
