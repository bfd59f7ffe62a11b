"""
Multi-stream Res-TCN for targeted refinement.

A second Res-TCN stack (the targeted-attention stream) reads a masked copy of
the input that keeps only the diagnosed dimensions. At every merge layer
l >= 2 a pipe convolution links the streams, alternating direction:

    even l:  X'_l = X'_{l-1} + F'(X'_{l-1})
             X_l  = X_{l-1}  + F(X_{l-1})  + pipe_l(X'_l)
    odd l:   X_l  = X_{l-1}  + F(X_{l-1})
             X'_l = X'_{l-1} + F'(X'_{l-1}) + pipe_l(X_l)

The head pools the channel concatenation of both final layers.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataio import SkeletonLayout
from .errors import ConfigError
from .numcore import (
    BatchNorm,
    Parameter,
    conv1d_backward,
    conv1d_forward,
    dense_softmax_xent_backward,
    dense_softmax_xent_forward,
    global_average_pool,
    global_average_pool_backward,
    he_normal,
    relu_backward,
    relu_forward,
)
from .restcn import UNIT_LAYERS, ResTCNConfig, Stream, _dropout_seeds, _split_bundles, check_input, fit

PIPE_SIGMAS = ("relu_only", "bn_relu")


@dataclass(frozen=True)
class MaskSpec:
    kept_dims: tuple
    note: str = ""

    def __post_init__(self):
        dims = tuple(int(d) for d in self.kept_dims)
        object.__setattr__(self, "kept_dims", dims)
        if not dims:
            raise ConfigError("mask must keep at least one dimension")
        if any(b <= a for a, b in zip(dims, dims[1:])) or dims[0] < 0:
            raise ConfigError("mask dimensions must be non-negative and strictly increasing")

    def validate(self, dim: int) -> "MaskSpec":
        if self.kept_dims[-1] >= dim:
            raise ConfigError(f"mask index {self.kept_dims[-1]} out of range for input dimension {dim}")
        return self

    @classmethod
    def all_dims(cls, dim: int, note: str = "all dimensions") -> "MaskSpec":
        return cls(tuple(range(dim)), note)

    @classmethod
    def from_joints(cls, layout: SkeletonLayout, joints, note: str = "") -> "MaskSpec":
        return cls(tuple(sorted(resolve_joint_refs(layout, joints))), note)

    def to_dict(self):
        return {"dims": list(self.kept_dims), "note": self.note}


def resolve_joint_refs(layout: SkeletonLayout, refs) -> set:
    """Joint references are ``name`` (every actor slot) or ``a<k>:name``."""
    dims = set()
    for ref in refs:
        actor = None
        if ":" in ref:
            slot, ref = ref.split(":", 1)
            if not slot.startswith("a") or not slot[1:].isdigit():
                raise ConfigError(f"bad actor prefix in joint reference {slot!r}")
            actor = int(slot[1:])
        dims.update(layout.joint_dims(ref, actor))
    return dims


def load_mask(path, layout: SkeletonLayout) -> MaskSpec:
    """Read a mask file (JSON or YAML) with ``joints`` and/or ``dims`` lists."""
    import yaml

    text = Path(path).read_text()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"unreadable mask file {path}: {e}") from None
    if not isinstance(doc, dict) or not ({"joints", "dims"} & doc.keys()):
        raise ConfigError(f"mask file {path} needs a 'joints' or 'dims' list")
    dims = set(int(d) for d in doc.get("dims", []))
    dims |= resolve_joint_refs(layout, doc.get("joints", []))
    note = str(doc.get("note", f"from {path}"))
    return MaskSpec(tuple(sorted(dims)), note).validate(layout.dim)


def mask_input(batch, mask: MaskSpec) -> np.ndarray:
    x = np.asarray(batch, dtype=np.float64)
    mask.validate(x.shape[-1])
    out = np.zeros_like(x)
    keep = list(mask.kept_dims)
    out[..., keep] = x[..., keep]
    return out


@dataclass(frozen=True)
class MSResTCNConfig:
    base: ResTCNConfig
    mask: MaskSpec
    pipe_filter_len: int = 1
    pipe_sigma: str = "relu_only"

    def __post_init__(self):
        if self.pipe_sigma not in PIPE_SIGMAS:
            raise ConfigError(f"pipe_sigma must be one of {PIPE_SIGMAS}")
        if self.pipe_filter_len < 1:
            raise ConfigError("pipe_filter_len must be positive")
        self.mask.validate(self.base.input_dim)

    def to_dict(self):
        return {"base": self.base.to_dict(), "mask": self.mask.to_dict(),
                "pipe_filter_len": self.pipe_filter_len, "pipe_sigma": self.pipe_sigma}

    @classmethod
    def from_dict(cls, d):
        m = d["mask"]
        return cls(ResTCNConfig.from_dict(d["base"]), MaskSpec(tuple(m["dims"]), m.get("note", "")),
                   d.get("pipe_filter_len", 1), d.get("pipe_sigma", "relu_only"))


class Pipe:
    def __init__(self, layer: int, channels: int, cfg: MSResTCNConfig, rng: np.random.Generator):
        f = cfg.pipe_filter_len
        self.layer = layer
        self.w = Parameter(he_normal(rng, (channels, f, channels), f * channels), f"pipe{layer}.w", "conv")
        self.bn = None
        if cfg.pipe_sigma == "bn_relu":
            self.bn = BatchNorm(channels, f"pipe{layer}.bn", cfg.base.bn_epsilon, cfg.base.bn_momentum)

    def parameters(self):
        return [self.w] + (self.bn.parameters() if self.bn else [])

    def forward(self, x, mode):
        h, conv_c = conv1d_forward(x, self.w.value, 1)
        bn_c = None
        if self.bn is not None:
            h, bn_c = self.bn.forward(h, mode)
        out, mask = relu_forward(h)
        return out, (conv_c, bn_c, mask)

    def backward(self, dout, cache):
        conv_c, bn_c, mask = cache
        d = relu_backward(dout, mask)
        if self.bn is not None:
            d = self.bn.backward(d, bn_c)
        dx, dw = conv1d_backward(d, conv_c)
        self.w.grad += dw
        return dx


class MSResTCN:
    kind = "msrestcn"

    def __init__(self, config: MSResTCNConfig, seed: int = 0):
        self.config = config
        base = config.base
        rng = np.random.default_rng(seed)
        self.main = Stream(base, rng, "main.")
        self.ta = Stream(base, rng, "ta.")
        self.pipes = {l: Pipe(l, base.channels(l), config, rng) for l in UNIT_LAYERS}
        c3, K = base.channels(10), base.num_classes
        self.head_w = Parameter(he_normal(rng, (2 * c3, K), 2 * c3), "head.w", "dense")
        self.head_b = Parameter(np.zeros(K), "head.b", "dense")
        self.ablate_main = False

    @property
    def num_classes(self) -> int:
        return self.config.base.num_classes

    def stream(self, name: str) -> Stream:
        return {"main": self.main, "ta": self.ta}[name]

    def parameters(self):
        ps = self.main.parameters() + self.ta.parameters()
        for l in UNIT_LAYERS:
            ps += self.pipes[l].parameters()
        return ps + [self.head_w, self.head_b]

    def batchnorms(self):
        bns = self.main.batchnorms() + self.ta.batchnorms()
        return bns + [p.bn for p in self.pipes.values() if p.bn is not None]

    def num_parameters(self) -> int:
        return sum(p.value.size for p in self.parameters())

    def _run(self, x, mode, rng, trace=None):
        x_main = np.zeros_like(x) if self.ablate_main else x
        x_ta = mask_input(x, self.config.mask)
        seeds = _dropout_seeds(mode, rng, 2 * len(UNIT_LAYERS))
        X, Xt, tape = {}, {}, {}
        X[1], tape["main", 1] = self.main.first(x_main)
        Xt[1], tape["ta", 1] = self.ta.first(x_ta)
        if trace is not None:
            trace += [("main", 1), ("ta", 1)]
        for i, l in enumerate(UNIT_LAYERS):
            pipe = self.pipes[l]
            if l % 2 == 0:
                Xt[l], tape["ta", l] = self.ta.units[l].forward(Xt[l - 1], mode, seeds[2 * i + 1])
                h, tape["pipe", l] = pipe.forward(Xt[l], mode)
                X[l], tape["main", l] = self.main.units[l].forward(X[l - 1], mode, seeds[2 * i])
                X[l] = X[l] + h
                order = [("ta", l), ("pipe", l, "ta->main"), ("main", l)]
            else:
                X[l], tape["main", l] = self.main.units[l].forward(X[l - 1], mode, seeds[2 * i])
                h, tape["pipe", l] = pipe.forward(X[l], mode)
                Xt[l], tape["ta", l] = self.ta.units[l].forward(Xt[l - 1], mode, seeds[2 * i + 1])
                Xt[l] = Xt[l] + h
                order = [("main", l), ("pipe", l, "main->ta"), ("ta", l)]
            if trace is not None:
                trace += order
        pooled = global_average_pool(np.concatenate([X[10], Xt[10]], axis=2))
        return pooled, X, Xt, tape

    def forward(self, x, mode: str = "eval", record: bool = False, rng=None, ids=None, trace=None):
        """Return ``(logits, bundles)``; bundles is ``(main, ta)`` lists when ``record``."""
        x = check_input(self.config.base, x)
        pooled, X, Xt, _ = self._run(x, mode, rng, trace)
        logits = pooled @ self.head_w.value + self.head_b.value
        if not record:
            return logits, None
        x_main = np.zeros_like(x) if self.ablate_main else x
        return logits, (_split_bundles(x_main, X, ids, "main"),
                        _split_bundles(mask_input(x, self.config.mask), Xt, ids, "ta"))

    def loss_and_backward(self, x, labels, rng=None, mode: str = "train"):
        x = check_input(self.config.base, x)
        pooled, X, Xt, tape = self._run(x, mode, rng)
        loss, probs, head_c = dense_softmax_xent_forward(pooled, self.head_w, self.head_b, labels)
        dpooled = dense_softmax_xent_backward(probs, head_c, self.head_w, self.head_b)
        c3 = X[10].shape[2]
        T10 = X[10].shape[1]
        d = global_average_pool_backward(dpooled[:, :c3], T10)
        dt = global_average_pool_backward(dpooled[:, c3:], T10)
        for l in reversed(UNIT_LAYERS):
            pipe = self.pipes[l]
            if l % 2 == 0:
                dt = dt + pipe.backward(d, tape["pipe", l])
            else:
                d = d + pipe.backward(dt, tape["pipe", l])
            d = self.main.units[l].backward(d, tape["main", l])
            dt = self.ta.units[l].backward(dt, tape["ta", l])
        self.main.first_backward(d, tape["main", 1])
        self.ta.first_backward(dt, tape["ta", 1])
        return loss, probs, None

    def state_dict(self):
        state = {p.name: p.value for p in self.parameters()}
        for bn in self.batchnorms():
            state.update(bn.buffers())
        return state

    def load_state_dict(self, state):
        from .restcn import load_state

        load_state(self, state)


def build_ms(config: MSResTCNConfig, seed: int = 0) -> MSResTCN:
    return MSResTCN(config, seed)


def ms_forward(model: MSResTCN, batch, mode: str = "eval", record: bool = False, rng=None, ids=None, trace=None):
    return model.forward(batch, mode=mode, record=record, rng=rng, ids=ids, trace=trace)


def ms_fit(model: MSResTCN, train_set, test_set, sgd, epochs, batch_size=128, seed=0, callback=None):
    """Joint training of both streams and all pipes; the TA input is masked inside the model."""
    return fit(model, train_set, test_set, sgd, epochs, batch_size, seed, callback)
