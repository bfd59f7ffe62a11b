"""
Feature map decoder.

Maps a recorded hidden activation map back to skeleton space. First-layer
filters are compressed to one frame each (mean of their two innermost
steps) and a frame of activations decodes to the response-weighted sum of
those compressed primitives. Deeper blocks are first retrieved to the
previous block's channel space through the compressed residual filters and
the identity-path convolution of the block's first unit, using that unit's
recorded activation from the same forward pass. Block-C retrieval therefore
lands on Block-B's channels at Block-C's time resolution; the Block-B
boundary activation is then read at the frames aligned with Block-C
(every ``stride``-th frame).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import MeanSkeleton, SkeletonLayout, SkeletonSequence, read_frames_csv, unflatten, write_frames_csv
from .errors import ConfigError, ConsistencyError, DataError, ParameterError
from .restcn import LAYERS, ActivationBundle


@dataclass(frozen=True)
class CompressedFilterBank:
    layer: int
    residual: np.ndarray  # N_l x C_in
    identity: np.ndarray | None = None  # N_l x C_in, layers 5 and 8 only

    @property
    def width(self) -> int:
        return self.residual.shape[0]


def compress(filters) -> np.ndarray:
    """N x f x C filters -> N x C, mean of (1-based) steps f/2 and f/2 + 1."""
    w = np.asarray(filters, dtype=np.float64)
    f = w.shape[1]
    if f % 2:
        raise ConfigError(f"cannot compress odd-length filters (f={f})")
    return (w[:, f // 2 - 1, :] + w[:, f // 2, :]) / 2.0


def _resolve(model, stream: str = "main"):
    if hasattr(model, "pipes"):
        return model.stream(stream), model.config.base
    return model.stream, model.config


def compress_filters(model, layer: int, stream: str = "main") -> CompressedFilterBank:
    s, cfg = _resolve(model, stream)
    if layer == 1:
        return CompressedFilterBank(1, compress(s.conv1.value))
    if layer not in (5, 8):
        raise ParameterError(f"compressed banks exist for layers 1, 5 and 8, not {layer}")
    unit = s.units[layer]
    if unit.proj is not None:
        ident = unit.proj.value[:, 0, :].copy()
    else:
        ident = np.eye(cfg.channels(layer), cfg.channels(layer - 1))
    return CompressedFilterBank(layer, compress(unit.w.value), ident)


def _check_bundle(bundle: ActivationBundle, cfg, layer: int):
    if layer not in LAYERS:
        raise ParameterError(f"layer must lie in 1..10, got {layer}")
    if bundle.x0.ndim != 2 or bundle.x0.shape[1] != cfg.input_dim:
        raise ConsistencyError(f"bundle input width {bundle.x0.shape} does not match model input {cfg.input_dim}")
    T = bundle.x0.shape[0]
    needed = [layer] + [b for b in (5, 8) if layer >= b]
    for l in needed:
        if l not in bundle.layers:
            raise DataError(f"bundle {bundle.sample_id!r} lacks recorded layer {l}")
        expect = (cfg.frames(l, T), cfg.channels(l))
        if bundle.layers[l].shape != expect:
            raise ConsistencyError(
                f"layer {l} activations {bundle.layers[l].shape} do not match the model ({expect})"
            )


def retrieve(acts, boundary, bank: CompressedFilterBank) -> np.ndarray:
    """Map block activations to the previous block's channel space."""
    return (acts - boundary) @ bank.residual + boundary @ bank.identity


def decode_raw(bundle: ActivationBundle, model, layer: int) -> np.ndarray:
    """Linear decode of one recorded layer at its native time resolution."""
    s, cfg = _resolve(model, bundle.stream)
    _check_bundle(bundle, cfg, layer)
    acts = bundle.layers[layer]
    if layer >= 8:
        acts = retrieve(acts, bundle.layers[8], compress_filters(model, 8, bundle.stream))
        step = cfg.stride(8)
        x5 = bundle.layers[5][::step][: acts.shape[0]]
        acts = retrieve(acts, x5, compress_filters(model, 5, bundle.stream))
    elif layer >= 5:
        acts = retrieve(acts, bundle.layers[5], compress_filters(model, 5, bundle.stream))
    return acts @ compress_filters(model, 1, bundle.stream).residual


def upsample_linear(seq, target_T: int) -> np.ndarray:
    """Piecewise-linear resampling to ``target_T`` frames; end frames are kept exactly."""
    seq = np.asarray(seq, dtype=np.float64)
    Tp = seq.shape[0]
    if Tp < 2:
        raise DataError("up-sampling needs at least two frames")
    if target_T < Tp:
        raise ParameterError(f"target length {target_T} shorter than input {Tp}")
    if target_T == Tp:
        return seq.copy()
    pos = np.linspace(0.0, Tp - 1, target_T)
    i0 = np.minimum(np.floor(pos).astype(np.int64), Tp - 2)
    frac = (pos - i0)[:, None]
    out = seq[i0] + frac * (seq[i0 + 1] - seq[i0])
    out[0] = seq[0]
    out[-1] = seq[-1]
    return out


@dataclass(frozen=True)
class DecodedSequence:
    frames: np.ndarray  # T x D
    layer: int
    sample_id: str
    mean_added: bool
    mean: np.ndarray | None = None

    def raw(self) -> np.ndarray:
        return self.frames - self.mean if self.mean_added else self.frames


def _mean_values(mean, dim):
    if mean is None:
        return np.zeros(dim)
    values = mean.values if isinstance(mean, MeanSkeleton) else np.asarray(mean, dtype=np.float64)
    if values.shape != (dim,):
        raise ConsistencyError(f"mean skeleton has shape {values.shape}, expected ({dim},)")
    return values


def decode(bundle: ActivationBundle, model, layer: int, mean=None) -> DecodedSequence:
    """Decode, up-sample to the input length and add the mean skeleton back."""
    raw = decode_raw(bundle, model, layer)
    T = bundle.x0.shape[0]
    if raw.shape[0] != T:
        raw = upsample_linear(raw, T)
    m = _mean_values(mean, raw.shape[1])
    return DecodedSequence(raw + m, layer, bundle.sample_id, True, m)


def filter_to_skeleton(model, filter_id: int, mean=None, layout: SkeletonLayout | None = None,
                       stream: str = "main") -> SkeletonSequence:
    """A first-layer filter as an f1-frame moving skeleton around the mean pose."""
    s, cfg = _resolve(model, stream)
    w = s.conv1.value
    if not 0 <= filter_id < w.shape[0]:
        raise ParameterError(f"filter id {filter_id} outside [0, {w.shape[0]})")
    if layout is None:
        from .dataio import NTU_LAYOUT

        layout = NTU_LAYOUT
    frames = w[filter_id] + _mean_values(mean, cfg.input_dim)
    return SkeletonSequence(unflatten(frames, layout), layout, name=f"filter{filter_id:03d}")


def write_decoded_csv(path, dec: DecodedSequence, layout: SkeletonLayout) -> None:
    if dec.frames.shape[1] != layout.dim:
        raise ConsistencyError("decoded width does not match the layout")
    write_frames_csv(path, dec.frames, layout.dim_names())


def read_decoded_csv(path) -> np.ndarray:
    return read_frames_csv(path)[1]
