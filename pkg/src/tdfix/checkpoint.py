"""Checkpoint directories: ``manifest.json`` plus one binary tensor per name."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataio import MeanSkeleton, SkeletonLayout
from .errors import DataError
from .msnet import MSResTCN, MSResTCNConfig
from .numcore import load_tensor, save_tensor
from .restcn import ResTCN, ResTCNConfig

FORMAT = "tdfix-checkpoint/1"


@dataclass
class Checkpoint:
    model: object
    mean: MeanSkeleton
    layout: SkeletonLayout
    class_names: list | None
    manifest: dict


def save_checkpoint(directory, model, mean: MeanSkeleton, layout: SkeletonLayout, class_names=None, **extra):
    directory = Path(directory)
    (directory / "tensors").mkdir(parents=True, exist_ok=True)
    state = model.state_dict()
    for name, arr in state.items():
        save_tensor(directory / "tensors" / f"{name}.bin", arr)
    save_tensor(directory / "tensors" / "mean_skeleton.bin", mean.values)
    manifest = {
        "format": FORMAT,
        "kind": model.kind,
        "config": model.config.to_dict(),
        "layout": layout.to_dict(),
        "class_names": class_names,
        "tensors": sorted(state),
        **extra,
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return directory


def load_checkpoint(directory) -> Checkpoint:
    directory = Path(directory)
    if (directory / "checkpoints" / "final").is_dir():
        directory = directory / "checkpoints" / "final"
    try:
        manifest = json.loads((directory / "manifest.json").read_text())
    except FileNotFoundError:
        raise DataError(f"no checkpoint manifest in {directory}") from None
    if manifest.get("format") != FORMAT:
        raise DataError(f"unsupported checkpoint format {manifest.get('format')!r}")
    if manifest["kind"] == "restcn":
        model = ResTCN(ResTCNConfig.from_dict(manifest["config"]))
    elif manifest["kind"] == "msrestcn":
        model = MSResTCN(MSResTCNConfig.from_dict(manifest["config"]))
    else:
        raise DataError(f"unknown model kind {manifest['kind']!r}")
    state = {name: load_tensor(directory / "tensors" / f"{name}.bin") for name in manifest["tensors"]}
    model.load_state_dict(state)
    mean = MeanSkeleton(np.asarray(load_tensor(directory / "tensors" / "mean_skeleton.bin")))
    return Checkpoint(model, mean, SkeletonLayout.from_dict(manifest["layout"]), manifest.get("class_names"),
                      manifest)
