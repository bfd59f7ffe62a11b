"""
Skeleton dataset plumbing.

Per-frame vectors are flattened actor-major, joint-major, xyz-minor:
dimension ``(a * J + j) * 3 + k`` holds coordinate ``k`` of joint ``j`` of
actor slot ``a``.
"""

from __future__ import annotations

import csv
import json
import os
import re
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np

from .errors import ConfigError, DataError, ParseError
from .numcore import load_tensor, save_tensor

NTU_JOINTS = (
    "spineBase", "spineMid", "neck", "head",
    "shoulderLeft", "elbowLeft", "wristLeft", "handLeft",
    "shoulderRight", "elbowRight", "wristRight", "handRight",
    "hipLeft", "kneeLeft", "ankleLeft", "footLeft",
    "hipRight", "kneeRight", "ankleRight", "footRight",
    "spineShoulder", "tipOfHandLeft", "thumbLeft", "tipOfHandRight", "thumbRight",
)  # fmt: skip

# 1-based pairs from the Kinect v2 joint map
_NTU_BONES_1 = (
    (1, 2), (2, 21), (3, 21), (4, 3), (5, 21), (6, 5), (7, 6), (8, 7),
    (9, 21), (10, 9), (11, 10), (12, 11), (13, 1), (14, 13), (15, 14), (16, 15),
    (17, 1), (18, 17), (19, 18), (20, 19), (22, 23), (23, 8), (24, 25), (25, 12),
)  # fmt: skip
NTU_BONES = tuple((a - 1, b - 1) for a, b in _NTU_BONES_1)

NTU_HAND_JOINTS = ("tipOfHandLeft", "thumbLeft", "tipOfHandRight", "thumbRight")

# Nominal horizontal angle of each NTU camera id.
NTU_CAMERA_ANGLES = {1: -45, 2: 0, 3: 45}

NTU_CS_TRAIN_SUBJECTS = (1, 2, 4, 5, 8, 9, 13, 14, 15, 16, 17, 18, 19, 25, 27, 28, 31, 34, 35, 38)
NTU_CV_TRAIN_CAMERAS = (2, 3)

SYNTH_JOINTS = (
    "pelvis", "spine", "neck", "head",
    "shoulderLeft", "elbowLeft", "wristLeft", "handLeft",
    "shoulderRight", "elbowRight", "wristRight", "handRight",
    "hipLeft", "kneeLeft", "hipRight", "kneeRight",
)  # fmt: skip
SYNTH_BONES = (
    (0, 1), (1, 2), (2, 3), (2, 4), (4, 5), (5, 6), (6, 7),
    (2, 8), (8, 9), (9, 10), (10, 11), (0, 12), (12, 13), (0, 14), (14, 15),
)  # fmt: skip
SYNTH_REST_POSE = np.array([
    [0.0, 0.0, 0.0], [0.0, 0.3, 0.0], [0.0, 0.6, 0.0], [0.0, 0.8, 0.0],
    [-0.2, 0.55, 0.0], [-0.25, 0.3, 0.0], [-0.3, 0.05, 0.0], [-0.32, -0.02, 0.0],
    [0.2, 0.55, 0.0], [0.25, 0.3, 0.0], [0.3, 0.05, 0.0], [0.32, -0.02, 0.0],
    [-0.1, -0.05, 0.0], [-0.12, -0.45, 0.0], [0.1, -0.05, 0.0], [0.12, -0.45, 0.0],
])  # fmt: skip
AXES = "xyz"


@dataclass(frozen=True)
class SkeletonLayout:
    joint_names: tuple
    actor_slots: int = 2
    bones: tuple = ()

    @property
    def num_joints(self) -> int:
        return len(self.joint_names)

    @property
    def dim(self) -> int:
        return self.actor_slots * self.num_joints * 3

    def dim_index(self, actor: int, joint: int, axis: int) -> int:
        return (actor * self.num_joints + joint) * 3 + axis

    def dim_names(self) -> list:
        return [
            f"a{a}_{name}_{ax}"
            for a in range(self.actor_slots)
            for name in self.joint_names
            for ax in AXES
        ]

    def joint_dims(self, name: str, actor: int | None = None) -> list:
        """Dimensions of a named joint, for one actor slot or all of them."""
        if name not in self.joint_names:
            raise ConfigError(f"unknown joint {name!r}")
        j = self.joint_names.index(name)
        actors = range(self.actor_slots) if actor is None else [actor]
        if actor is not None and not 0 <= actor < self.actor_slots:
            raise ConfigError(f"actor slot {actor} out of range")
        return [self.dim_index(a, j, k) for a in actors for k in range(3)]

    def to_dict(self):
        return {"joint_names": list(self.joint_names), "actor_slots": self.actor_slots,
                "bones": [list(b) for b in self.bones]}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["joint_names"]), int(d["actor_slots"]), tuple(tuple(b) for b in d.get("bones", ())))


NTU_LAYOUT = SkeletonLayout(NTU_JOINTS, 2, NTU_BONES)
SYNTH_LAYOUT = SkeletonLayout(SYNTH_JOINTS, 1, SYNTH_BONES)


@dataclass
class SkeletonSequence:
    """``frames`` has shape T x actor_slots x J x 3 (meters)."""

    frames: np.ndarray
    layout: SkeletonLayout = NTU_LAYOUT
    label: int = -1
    meta: dict = field(default_factory=dict)
    name: str = ""

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]


def flatten(seq: SkeletonSequence) -> np.ndarray:
    return seq.frames.reshape(seq.num_frames, -1).astype(np.float64)


def unflatten(frames, layout: SkeletonLayout) -> np.ndarray:
    frames = np.asarray(frames, dtype=np.float64)
    if frames.shape[-1] != layout.dim:
        raise DataError(f"frame width {frames.shape[-1]} != layout dimension {layout.dim}")
    return frames.reshape(frames.shape[0], layout.actor_slots, layout.num_joints, 3)


# ---------------------------------------------------------------------------
# NTU .skeleton files
# ---------------------------------------------------------------------------


class _Lines:
    def __init__(self, stream, source):
        self.it = iter(stream)
        self.line = 0
        self.source = source

    def next(self, what):
        for raw in self.it:
            self.line += 1
            text = raw.strip()
            if text:
                return text
        raise ParseError(f"truncated file: expected {what}", self.line + 1, self.source)

    def integer(self, what):
        text = self.next(what)
        try:
            return int(text.split()[0])
        except ValueError:
            raise ParseError(f"expected integer {what}, got {text!r}", self.line, self.source) from None

    def floats(self, what, minimum):
        text = self.next(what)
        try:
            vals = [float(tok) for tok in text.split()]
        except ValueError:
            raise ParseError(f"non-numeric token in {what}: {text!r}", self.line, self.source) from None
        if len(vals) < minimum:
            raise ParseError(f"{what} needs at least {minimum} values, got {len(vals)}", self.line, self.source)
        return vals


def parse_ntu_skeleton(stream: TextIO | Iterable[str], source: str | None = None, max_actors: int = 2,
                       layout: SkeletonLayout = NTU_LAYOUT) -> SkeletonSequence:
    """Parse the NTU RGB+D text layout into a zero-filled actor-slot array.

    Bodies beyond ``max_actors`` in a frame are dropped with a warning.
    """
    if isinstance(stream, str):
        stream = stream.splitlines()
    lines = _Lines(stream, source)
    n_frames = lines.integer("frame count")
    if n_frames <= 0:
        raise ParseError("empty sequence (frame count 0)", lines.line, source)
    J = layout.num_joints
    frames = np.zeros((n_frames, max_actors, J, 3))
    dropped = 0
    for t in range(n_frames):
        n_bodies = lines.integer(f"body count of frame {t + 1}")
        if n_bodies < 0:
            raise ParseError("negative body count", lines.line, source)
        for b in range(n_bodies):
            lines.next(f"body info line (frame {t + 1}, body {b + 1})")
            n_joints = lines.integer("joint count")
            if n_joints != J:
                raise ParseError(f"joint count {n_joints} != {J}", lines.line, source)
            for j in range(J):
                vals = lines.floats(f"joint {j + 1} of body {b + 1}, frame {t + 1}", 3)
                if b < max_actors:
                    frames[t, b, j] = vals[:3]
        dropped = max(dropped, n_bodies - max_actors)
    if dropped > 0:
        warnings.warn(f"{source or 'sequence'}: dropped {dropped} bodies beyond {max_actors} actor slots")
    return SkeletonSequence(frames, layout, name=source or "")


@dataclass(frozen=True)
class NTUMeta:
    setup: int
    camera: int
    performer: int
    replication: int
    action: int

    @property
    def camera_angle(self) -> int:
        return NTU_CAMERA_ANGLES[self.camera]


_NTU_NAME = re.compile(r"^S(\d{3})C(\d{3})P(\d{3})R(\d{3})A(\d{3})$")


def parse_ntu_filename(name: str) -> NTUMeta:
    stem = os.path.basename(str(name))
    if stem.endswith(".skeleton"):
        stem = stem[: -len(".skeleton")]
    m = _NTU_NAME.match(stem)
    if not m:
        raise ParseError(f"not an NTU sample name: {name!r}")
    return NTUMeta(*(int(g) for g in m.groups()))


def load_ntu_file(path) -> SkeletonSequence:
    path = Path(path)
    meta = parse_ntu_filename(path.name)
    with open(path) as fp:
        seq = parse_ntu_skeleton(fp, source=str(path))
    seq.name = path.name[: -len(".skeleton")] if path.name.endswith(".skeleton") else path.stem
    seq.label = meta.action - 1
    seq.meta = asdict(meta)
    return seq


# ---------------------------------------------------------------------------
# portable CSV sequences
# ---------------------------------------------------------------------------


def write_sequence_csv(path, seq: SkeletonSequence) -> None:
    """One row per frame under a header of dimension names, plus ``<stem>.json``."""
    path = Path(path)
    write_frames_csv(path, flatten(seq), seq.layout.dim_names())
    sidecar = {"label": seq.label, "meta": seq.meta, "name": seq.name, "layout": seq.layout.to_dict()}
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2))


def read_sequence_csv(path) -> SkeletonSequence:
    path = Path(path)
    side = path.with_suffix(".json")
    sidecar = json.loads(side.read_text()) if side.exists() else {}
    layout = SkeletonLayout.from_dict(sidecar["layout"]) if "layout" in sidecar else NTU_LAYOUT
    header, frames = read_frames_csv(path)
    if header != layout.dim_names():
        raise ParseError("CSV header does not match the skeleton layout", 1, str(path))
    return SkeletonSequence(unflatten(frames, layout), layout, int(sidecar.get("label", -1)),
                            sidecar.get("meta", {}), sidecar.get("name", path.stem))


def write_frames_csv(path, frames, header) -> None:
    with open(path, "w", newline="") as fp:
        w = csv.writer(fp)
        w.writerow(header)
        for row in np.asarray(frames):
            w.writerow([repr(float(v)) for v in row])


def read_frames_csv(path):
    with open(path, newline="") as fp:
        rows = list(csv.reader(fp))
    if not rows:
        raise ParseError("empty CSV", 1, str(path))
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=np.float64)
    except ValueError as e:
        raise ParseError(f"non-numeric CSV value: {e}", None, str(path)) from None
    return rows[0], data.reshape(len(rows) - 1, len(rows[0]))


def load_sequences(directory) -> list:
    """All ``.skeleton`` and ``.csv`` sequences in a directory, sorted by name."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"no such data directory: {directory}")
    seqs = []
    for p in sorted(directory.iterdir()):
        if p.suffix == ".skeleton":
            seqs.append(load_ntu_file(p))
        elif p.suffix == ".csv":
            seqs.append(read_sequence_csv(p))
    if not seqs:
        raise DataError(f"no .skeleton or .csv sequences in {directory}")
    return seqs


# ---------------------------------------------------------------------------
# splits and preprocessing
# ---------------------------------------------------------------------------


def split(sequences: Sequence[SkeletonSequence], protocol: str, train_ids=None):
    """Partition by performer (cross_subject) or camera id (cross_view)."""
    if protocol == "cross_subject":
        key, default = "performer", NTU_CS_TRAIN_SUBJECTS
    elif protocol == "cross_view":
        key, default = "camera", NTU_CV_TRAIN_CAMERAS
    else:
        raise ConfigError(f"unknown protocol {protocol!r}")
    ids = set(default if train_ids is None else train_ids)
    train, test = [], []
    for s in sequences:
        if key not in s.meta:
            raise DataError(f"sequence {s.name!r} lacks {key} metadata")
        (train if s.meta[key] in ids else test).append(s)
    if not train or not test:
        raise ConfigError(f"{protocol} split with train ids {sorted(ids)} leaves an empty side")
    return train, test


@dataclass(frozen=True)
class MeanSkeleton:
    values: np.ndarray

    @classmethod
    def from_sequences(cls, sequences: Sequence[SkeletonSequence]) -> "MeanSkeleton":
        if not sequences:
            raise DataError("mean skeleton needs at least one training sequence")
        frames = np.concatenate([flatten(s) for s in sequences])
        return cls(frames.mean(axis=0))

    @classmethod
    def zeros(cls, dim: int) -> "MeanSkeleton":
        return cls(np.zeros(dim))


def _fit_length(x, target_T, fill):
    T = x.shape[0]
    if T >= target_T:
        start = (T - target_T) // 2
        return x[start:start + target_T]
    pad = np.broadcast_to(fill, (target_T - T, x.shape[1]))
    return np.concatenate([x, pad])


def preprocess(seq: SkeletonSequence, target_T: int, mean: MeanSkeleton, pad_after: bool = False) -> np.ndarray:
    """Flatten, trailing zero-pad or center-crop to ``target_T``, subtract the mean.

    Padding happens before mean subtraction, so padded frames become
    ``-mean``; with ``pad_after`` the subtraction comes first and padded
    frames stay zero.
    """
    x = flatten(seq)
    if pad_after:
        return _fit_length(x - mean.values, target_T, 0.0)
    return _fit_length(x, target_T, 0.0) - mean.values


@dataclass
class Dataset:
    x: np.ndarray
    y: np.ndarray
    ids: list
    num_classes: int
    layout: SkeletonLayout
    mean: MeanSkeleton
    class_names: list | None = None
    meta: list = field(default_factory=list)

    def __len__(self):
        return len(self.y)

    def subset(self, idx) -> "Dataset":
        idx = list(idx)
        return Dataset(self.x[idx], self.y[idx], [self.ids[i] for i in idx], self.num_classes, self.layout,
                       self.mean, self.class_names, [self.meta[i] for i in idx] if self.meta else [])

    def index_of(self, sample_id: str) -> int:
        try:
            return self.ids.index(sample_id)
        except ValueError:
            raise DataError(f"unknown sample id {sample_id!r}") from None


def to_dataset(sequences, target_T, mean, num_classes, class_names=None, pad_after=False) -> Dataset:
    if not sequences:
        raise DataError("cannot build an empty dataset")
    x = np.stack([preprocess(s, target_T, mean, pad_after) for s in sequences])
    y = np.array([s.label for s in sequences], dtype=np.int64)
    if y.min() < 0 or y.max() >= num_classes:
        raise DataError(f"labels outside [0, {num_classes})")
    return Dataset(x, y, [s.name for s in sequences], num_classes, sequences[0].layout, mean,
                   class_names, [dict(s.meta) for s in sequences])


def build_datasets(train_seqs, test_seqs, target_T, num_classes, class_names=None, pad_after=False):
    """Preprocess both sides with the mean skeleton of the training side only."""
    mean = MeanSkeleton.from_sequences(train_seqs)
    return (to_dataset(train_seqs, target_T, mean, num_classes, class_names, pad_after),
            to_dataset(test_seqs, target_T, mean, num_classes, class_names, pad_after))


def save_dataset(directory, ds: Dataset) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_tensor(directory / "x.bin", ds.x)
    save_tensor(directory / "mean.bin", ds.mean.values)
    manifest = {
        "ids": list(ds.ids), "labels": [int(v) for v in ds.y], "num_classes": ds.num_classes,
        "layout": ds.layout.to_dict(), "class_names": ds.class_names, "meta": ds.meta,
    }
    (directory / "manifest.json").write_text(json.dumps(manifest))


def load_dataset(directory) -> Dataset:
    directory = Path(directory)
    try:
        manifest = json.loads((directory / "manifest.json").read_text())
    except FileNotFoundError:
        raise DataError(f"no dataset manifest in {directory}") from None
    x = load_tensor(directory / "x.bin")
    y = np.array(manifest["labels"], dtype=np.int64)
    if len(y) != x.shape[0]:
        raise DataError("label count does not match tensor batch size")
    return Dataset(x, y, manifest["ids"], manifest["num_classes"], SkeletonLayout.from_dict(manifest["layout"]),
                   MeanSkeleton(load_tensor(directory / "mean.bin")), manifest.get("class_names"),
                   manifest.get("meta", []))


# ---------------------------------------------------------------------------
# synthetic fine-motion benchmark
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticSpec:
    """Four-class surrogate of fine-grained hand actions.

    Classes 0 and 1 share their gross motion and differ only by the
    frequency of a small oscillation on ``fine_joints`` (``fine_frequency``
    vs ``fine_frequency_alt`` cycles per sequence). The remaining classes
    have distinct gross motions and an uninformative fine oscillation.
    Every sample carries random distractor motion on the non-fine joints.
    """

    num_classes: int = 4
    frames: int = 64
    train_per_class: int = 200
    test_per_class: int = 50
    fine_joints: tuple = ("handLeft", "handRight")
    fine_amplitude: float = 0.065
    fine_frequency: float = 8.0
    fine_frequency_alt: float = 16.0
    distractor_amplitude: float = 0.3
    gross_amplitude: float = 0.15
    noise: float = 0.02
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "fine_joints", tuple(self.fine_joints))
        if self.num_classes < 2:
            raise ConfigError("synthetic data needs at least the confusable pair")
        if self.frames < 2 or self.train_per_class < 1 or self.test_per_class < 1:
            raise ConfigError("synthetic frames and sample counts must be positive")

    @property
    def layout(self) -> SkeletonLayout:
        return SYNTH_LAYOUT

    @property
    def fine_dims(self) -> list:
        return sorted(d for j in self.fine_joints for d in SYNTH_LAYOUT.joint_dims(j))

    confusable_pair = (0, 1)

    def to_dict(self):
        d = asdict(self)
        d["fine_joints"] = list(self.fine_joints)
        return d


def _gross_template(k: int, t: np.ndarray, J: int) -> np.ndarray:
    """Class-specific gross motion, T x J x 3, fixed per class index."""
    crng = np.random.default_rng(10_000 + k)
    amp = crng.normal(size=(J, 3))
    freq = crng.uniform(0.5, 2.0, size=(J, 3))
    phase = crng.uniform(0, 2 * np.pi, size=(J, 3))
    return amp * np.sin(2 * np.pi * freq * t[:, None, None] + phase)


def synth_generate(spec: SyntheticSpec) -> tuple[list, list]:
    """Return ``(train, test)`` lists of labeled synthetic sequences."""
    rng = np.random.default_rng(spec.seed)
    layout = SYNTH_LAYOUT
    J, T = layout.num_joints, spec.frames
    t = np.arange(T) / T
    fine = np.zeros((J, 3), dtype=bool)
    for name in spec.fine_joints:
        fine[layout.joint_names.index(name)] = True
    coarse = ~fine
    templates = {}
    for k in range(spec.num_classes):
        base = 0 if k == 1 else k  # the confusable pair shares its gross motion
        templates[k] = _gross_template(base, t, J)
    fine_dir = np.random.default_rng(20_000).normal(size=(J, 3))
    fine_dir /= np.linalg.norm(fine_dir, axis=1, keepdims=True)

    def sample(k, idx, split_name):
        gross = spec.gross_amplitude * templates[k]
        n_comp = 3
        freqs = rng.uniform(0.5, 4.0, size=(n_comp, J, 3))
        phases = rng.uniform(0, 2 * np.pi, size=(n_comp, J, 3))
        amps = rng.normal(size=(n_comp, J, 3)) / np.sqrt(n_comp)
        distract = spec.distractor_amplitude * (amps * np.sin(2 * np.pi * freqs * t[:, None, None, None]
                                                              + phases)).sum(axis=1)
        if k in (0, 1):
            freq = spec.fine_frequency if k == 0 else spec.fine_frequency_alt
            phase = rng.normal(scale=0.2)
        else:
            freq = spec.fine_frequency if rng.random() < 0.5 else spec.fine_frequency_alt
            phase = rng.uniform(0, 2 * np.pi)
        osc = np.sin(2 * np.pi * freq * t + phase)
        motion = np.where(coarse, gross + distract, 0.0)
        motion = motion + np.where(fine, spec.fine_amplitude * osc[:, None, None] * fine_dir, 0.0)
        # fine joints follow the class gross motion of their parent joint, never the distractor
        for j in np.flatnonzero(fine.any(axis=1)):
            parent = next((a for a, b in layout.bones if b == j), None)
            if parent is not None:
                motion[:, j] += gross[:, parent]
        frames = SYNTH_REST_POSE + motion + rng.normal(scale=spec.noise, size=(T, J, 3))
        meta = {"split": split_name, "index": idx, "performer": idx % 10 + 1, "camera": 1}
        return SkeletonSequence(frames[:, None], layout, k, meta, f"{split_name}{k:02d}_{idx:04d}")

    train, test = [], []
    for k in range(spec.num_classes):
        for i in range(spec.train_per_class):
            train.append(sample(k, i, "train"))
        for i in range(spec.test_per_class):
            test.append(sample(k, i, "test"))
    return train, test


def synth_datasets(spec: SyntheticSpec):
    train, test = synth_generate(spec)
    names = [f"class{k}" for k in range(spec.num_classes)]
    return build_datasets(train, test, spec.frames, spec.num_classes, names)
