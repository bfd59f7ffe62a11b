"""
Residual temporal convolutional network.

Layer 1 is a bare convolution over the raw sequence. Layers 2..10 are
residual units ``X_l = P_l(X_{l-1}) + W_l * dropout(relu(bn(X_{l-1})))``
where ``P_l`` is the identity except at the first unit of blocks B and C
(layers 5 and 8), where a length-1 stride-2 convolution matches channels
and time resolution. The head is global average pooling plus a dense
softmax layer.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, DataError, NumericError, ParameterError
from .numcore import (
    SGD,
    BatchNorm,
    Parameter,
    SGDConfig,
    as_tensor,
    conv1d_backward,
    conv1d_forward,
    dense_softmax_xent_backward,
    dense_softmax_xent_forward,
    dropout_backward,
    dropout_forward,
    global_average_pool,
    global_average_pool_backward,
    he_normal,
    plateau_schedule,
    relu_backward,
    relu_forward,
)

log = logging.getLogger(__name__)

LAYERS = tuple(range(1, 11))
UNIT_LAYERS = tuple(range(2, 11))
BLOCK_STARTS = (5, 8)


@dataclass(frozen=True)
class ResTCNConfig:
    input_dim: int = 120
    num_classes: int = 60
    block_channels: tuple = (64, 128, 256)
    first_filter_len: int = 8
    unit_filter_len: int = 8
    dropout: float = 0.5
    downsample: bool = True
    bn_epsilon: float = 1e-5
    bn_momentum: float = 0.9

    def __post_init__(self):
        object.__setattr__(self, "block_channels", tuple(int(c) for c in self.block_channels))
        if len(self.block_channels) != 3 or min(self.block_channels) < 1:
            raise ConfigError(f"block_channels must be three positive ints, got {self.block_channels}")
        if self.input_dim < 1 or self.num_classes < 1:
            raise ConfigError("input_dim and num_classes must be positive")
        if self.first_filter_len < 2 or self.first_filter_len % 2:
            raise ConfigError(f"first_filter_len must be even, got {self.first_filter_len}")
        if self.unit_filter_len < 1:
            raise ConfigError("unit_filter_len must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")

    def channels(self, layer: int) -> int:
        c1, c2, c3 = self.block_channels
        if layer <= 4:
            return c1
        return c2 if layer <= 7 else c3

    def stride(self, layer: int) -> int:
        return 2 if (self.downsample and layer in BLOCK_STARTS) else 1

    def has_projection(self, layer: int) -> bool:
        return layer in BLOCK_STARTS and (
            self.stride(layer) != 1 or self.channels(layer) != self.channels(layer - 1)
        )

    def frames(self, layer: int, T: int) -> int:
        for l in range(2, layer + 1):
            T = -(-T // self.stride(l))
        return T

    def to_dict(self):
        d = asdict(self)
        d["block_channels"] = list(self.block_channels)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True)
class ActivationBundle:
    """Per-layer activations of one sample from one forward pass."""

    sample_id: str
    x0: np.ndarray
    layers: dict = field(default_factory=dict)
    stream: str = "main"

    def __getitem__(self, layer: int) -> np.ndarray:
        return self.layers[layer]

    def scaled(self, alpha: float) -> "ActivationBundle":
        return ActivationBundle(
            self.sample_id, alpha * self.x0, {l: alpha * x for l, x in self.layers.items()}, self.stream
        )


class ResidualUnit:
    def __init__(self, layer: int, cfg: ResTCNConfig, rng: np.random.Generator, prefix: str = ""):
        c_in, c_out = cfg.channels(layer - 1), cfg.channels(layer)
        f = cfg.unit_filter_len
        self.layer = layer
        self.stride = cfg.stride(layer)
        self.p = cfg.dropout
        self.bn = BatchNorm(c_in, f"{prefix}unit{layer}.bn", cfg.bn_epsilon, cfg.bn_momentum)
        self.w = Parameter(he_normal(rng, (c_out, f, c_in), f * c_in), f"{prefix}unit{layer}.w")
        self.proj = None
        if cfg.has_projection(layer):
            self.proj = Parameter(he_normal(rng, (c_out, 1, c_in), c_in), f"{prefix}unit{layer}.proj")

    def parameters(self):
        ps = self.bn.parameters() + [self.w]
        return ps + [self.proj] if self.proj is not None else ps

    def forward(self, x, mode, seed=None):
        h, bn_c = self.bn.forward(x, mode)
        r, relu_mask = relu_forward(h)
        d, drop_mask = dropout_forward(r, self.p, mode, seed)
        res, conv_c = conv1d_forward(d, self.w.value, self.stride)
        if self.proj is None:
            ident, proj_c = x, None
        else:
            ident, proj_c = conv1d_forward(x, self.proj.value, self.stride)
        return ident + res, (bn_c, relu_mask, drop_mask, conv_c, proj_c)

    def backward(self, dout, cache):
        bn_c, relu_mask, drop_mask, conv_c, proj_c = cache
        dd, dw = conv1d_backward(dout, conv_c)
        self.w.grad += dw
        dx = self.bn.backward(relu_backward(dropout_backward(dd, drop_mask), relu_mask), bn_c)
        if proj_c is None:
            return dx + dout
        dxi, dwp = conv1d_backward(dout, proj_c)
        self.proj.grad += dwp
        return dx + dxi


class Stream:
    """First convolution plus the nine residual units of one Res-TCN stack."""

    def __init__(self, cfg: ResTCNConfig, rng: np.random.Generator, prefix: str = ""):
        self.cfg = cfg
        self.prefix = prefix
        f1, D = cfg.first_filter_len, cfg.input_dim
        self.conv1 = Parameter(he_normal(rng, (cfg.channels(1), f1, D), f1 * D), f"{prefix}conv1.w")
        self.units = {l: ResidualUnit(l, cfg, rng, prefix) for l in UNIT_LAYERS}

    def parameters(self):
        ps = [self.conv1]
        for l in UNIT_LAYERS:
            ps += self.units[l].parameters()
        return ps

    def batchnorms(self):
        return [self.units[l].bn for l in UNIT_LAYERS]

    def first(self, x0):
        return conv1d_forward(x0, self.conv1.value, 1)

    def first_backward(self, dout, cache):
        dx, dw = conv1d_backward(dout, cache)
        self.conv1.grad += dw
        return dx


def check_input(cfg: ResTCNConfig, x) -> np.ndarray:
    x = as_tensor(x)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3 or x.shape[2] != cfg.input_dim:
        raise DataError(f"expected B x T x {cfg.input_dim} input, got shape {x.shape}")
    if x.shape[1] < cfg.first_filter_len:
        raise DataError(f"sequence length {x.shape[1]} shorter than first filter {cfg.first_filter_len}")
    return x


def _split_bundles(x0, layers, ids, stream="main"):
    B = x0.shape[0]
    if ids is None:
        ids = [str(i) for i in range(B)]
    return [
        ActivationBundle(str(ids[b]), x0[b].copy(), {l: layers[l][b].copy() for l in layers}, stream)
        for b in range(B)
    ]


def _dropout_seeds(mode, rng, n):
    if mode != "train":
        return [None] * n
    if rng is None:
        rng = np.random.default_rng()
    return [int(s) for s in rng.integers(0, 2**63 - 1, size=n)]


class ResTCN:
    kind = "restcn"

    def __init__(self, config: ResTCNConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        self.stream = Stream(config, rng)
        c3, K = config.channels(10), config.num_classes
        self.head_w = Parameter(he_normal(rng, (c3, K), c3), "head.w", "dense")
        self.head_b = Parameter(np.zeros(K), "head.b", "dense")

    @property
    def num_classes(self) -> int:
        return self.config.num_classes

    def parameters(self):
        return self.stream.parameters() + [self.head_w, self.head_b]

    def batchnorms(self):
        return self.stream.batchnorms()

    def num_parameters(self) -> int:
        return sum(p.value.size for p in self.parameters())

    def _run(self, x, mode, rng):
        s = self.stream
        seeds = _dropout_seeds(mode, rng, len(UNIT_LAYERS))
        layers = {}
        tape = {}
        layers[1], tape[1] = s.first(x)
        for seed, l in zip(seeds, UNIT_LAYERS):
            layers[l], tape[l] = s.units[l].forward(layers[l - 1], mode, seed)
        pooled = global_average_pool(layers[10])
        return pooled, layers, tape

    def forward(self, x, mode: str = "eval", record: bool = False, rng=None, ids=None):
        """Return ``(logits, bundles)``; bundles is None unless ``record``."""
        x = check_input(self.config, x)
        pooled, layers, _ = self._run(x, mode, rng)
        logits = pooled @ self.head_w.value + self.head_b.value
        return logits, (_split_bundles(x, layers, ids) if record else None)

    def loss_and_backward(self, x, labels, rng=None, mode: str = "train"):
        """Forward, mean cross-entropy and backward; gradients accumulate."""
        x = check_input(self.config, x)
        pooled, layers, tape = self._run(x, mode, rng)
        loss, probs, head_c = dense_softmax_xent_forward(pooled, self.head_w, self.head_b, labels)
        dpooled = dense_softmax_xent_backward(probs, head_c, self.head_w, self.head_b)
        d = global_average_pool_backward(dpooled, layers[10].shape[1])
        for l in reversed(UNIT_LAYERS):
            d = self.stream.units[l].backward(d, tape[l])
        dx = self.stream.first_backward(d, tape[1])
        return loss, probs, dx

    def state_dict(self):
        state = {p.name: p.value for p in self.parameters()}
        for bn in self.batchnorms():
            state.update(bn.buffers())
        return state

    def load_state_dict(self, state):
        load_state(self, state)


def load_state(model, state):
    targets = {p.name: p.value for p in model.parameters()}
    for bn in model.batchnorms():
        targets.update(bn.buffers())
    missing = set(targets) - set(state)
    if missing:
        raise DataError(f"checkpoint is missing tensors: {sorted(missing)[:5]}")
    for name, arr in targets.items():
        src = np.asarray(state[name])
        if src.shape != arr.shape:
            raise DataError(f"tensor {name}: shape {src.shape} != {arr.shape}")
        arr[...] = src


def build_restcn(config: ResTCNConfig, seed: int = 0) -> ResTCN:
    return ResTCN(config, seed)


def forward(model, batch, mode: str = "eval", record: bool = False, rng=None, ids=None):
    return model.forward(batch, mode=mode, record=record, rng=rng, ids=ids)


# ---------------------------------------------------------------------------
# training and evaluation
# ---------------------------------------------------------------------------


def xent_from_logits(logits, labels):
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return float(-logp[np.arange(len(labels)), labels].mean())


def predict_logits(model, x, batch_size: int = 256):
    out = []
    for i in range(0, len(x), batch_size):
        out.append(model.forward(x[i:i + batch_size], mode="eval")[0])
    return np.concatenate(out) if out else np.zeros((0, model.num_classes))


def loss_and_accuracy(model, dataset, batch_size: int = 256):
    logits = predict_logits(model, dataset.x, batch_size)
    y = np.asarray(dataset.y)
    return xent_from_logits(logits, y), float((logits.argmax(axis=1) == y).mean())


def fit(
    model,
    train_set,
    test_set,
    sgd: SGDConfig,
    epochs: int,
    batch_size: int = 128,
    seed: int = 0,
    callback: Callable | None = None,
):
    """Train with seeded shuffling, L1 on conv weights and reduce-on-plateau.

    Returns one record per epoch. Record 0 holds eval-mode losses before
    any update. ``train_loss``/``train_acc`` of later records average the
    training-mode mini-batches; test metrics are always eval-mode.
    ``callback(record, model)`` runs after every epoch.
    """
    if len(train_set.y) == 0 or len(test_set.y) == 0:
        raise DataError("fit needs non-empty train and test sets")
    if batch_size < 1 or epochs < 0:
        raise ParameterError("batch_size must be positive and epochs non-negative")
    rng = np.random.default_rng(seed)
    opt = SGD(model.parameters(), sgd)
    x_all, y_all = np.asarray(train_set.x), np.asarray(train_set.y)
    n = len(y_all)

    tr_loss, tr_acc = loss_and_accuracy(model, train_set)
    te_loss, te_acc = loss_and_accuracy(model, test_set)
    history = [dict(epoch=0, lr=opt.lr, train_loss=tr_loss, train_acc=tr_acc, test_loss=te_loss, test_acc=te_acc)]
    if callback:
        callback(history[-1], model)
    test_losses = []
    for epoch in range(1, epochs + 1):
        lr_used = opt.lr
        order = rng.permutation(n)
        total_loss = 0.0
        correct = 0
        for i in range(0, n, batch_size):
            idx = order[i:i + batch_size]
            opt.zero_grad()
            loss, probs, _ = model.loss_and_backward(x_all[idx], y_all[idx], rng)
            if not np.isfinite(loss):
                raise NumericError(f"non-finite training loss at epoch {epoch}")
            opt.step()
            total_loss += loss * len(idx)
            correct += int((probs.argmax(axis=1) == y_all[idx]).sum())
        te_loss, te_acc = loss_and_accuracy(model, test_set)
        if not np.isfinite(te_loss):
            raise NumericError(f"non-finite test loss at epoch {epoch}")
        test_losses.append(te_loss)
        opt.lr = plateau_schedule(test_losses, sgd)
        rec = dict(epoch=epoch, lr=lr_used, train_loss=total_loss / n, train_acc=correct / n,
                   test_loss=te_loss, test_acc=te_acc)
        history.append(rec)
        log.info("epoch %d lr %.3g train %.4f/%.3f test %.4f/%.3f", epoch, lr_used,
                 rec["train_loss"], rec["train_acc"], te_loss, te_acc)
        if callback:
            callback(rec, model)
    return history


@dataclass
class EvalReport:
    accuracy: float
    per_class: dict
    confusion: np.ndarray
    class_names: list | None = None


def confusion_matrix(y_true, y_pred, K: int) -> np.ndarray:
    cm = np.zeros((K, K), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true), np.asarray(y_pred)), 1)
    return cm


def report_from_predictions(y_true, y_pred, K, class_names=None) -> EvalReport:
    cm = confusion_matrix(y_true, y_pred, K)
    rows = cm.sum(axis=1)
    per_class = {k: (cm[k, k] / rows[k] if rows[k] else float("nan")) for k in range(K)}
    acc = float(np.trace(cm) / cm.sum()) if cm.sum() else float("nan")
    return EvalReport(acc, per_class, cm, class_names)


def evaluate(model, dataset, batch_size: int = 256) -> EvalReport:
    logits = predict_logits(model, dataset.x, batch_size)
    K = logits.shape[1]
    return report_from_predictions(dataset.y, logits.argmax(axis=1), K, getattr(dataset, "class_names", None))


def response_trace(bundle: ActivationBundle, layer: int, filter_ids) -> np.ndarray:
    """Absolute filter responses over time, one row per requested filter."""
    if layer not in bundle.layers:
        raise ParameterError(f"layer {layer} not recorded (have {sorted(bundle.layers)})")
    x = bundle.layers[layer]
    ids = np.asarray(list(filter_ids), dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= x.shape[1]):
        raise ParameterError(f"filter ids must lie in [0, {x.shape[1]})")
    return np.abs(x[:, ids]).T
