"""Static figures written next to the CSV exports."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 8,
    "axes.titlesize": 8,
    "axes.labelsize": 8,
    "legend.fontsize": 7,
    "xtick.labelsize": 7,
    "ytick.labelsize": 7,
    "svg.fonttype": "none",
}
ACTOR_COLORS = ("tab:blue", "tab:red", "tab:green", "tab:purple")


def _save(fig, path):
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)


def pick_frames(T: int, max_panels: int = 16, step: int | None = None) -> list:
    if step is None:
        step = max(1, math.ceil(T / max_panels))
    return list(range(0, T, step))


def render_skeleton_strip(frames, layout, path, frame_ids=None, title=None, ncols: int = 8):
    """Orthographic x-y projection of selected frames, one panel per frame.

    ``frames`` is T x actor_slots x J x 3. Actor slots that are exactly zero
    throughout are skipped.
    """
    frames = np.asarray(frames)
    if frame_ids is None:
        frame_ids = pick_frames(frames.shape[0])
    slots = [a for a in range(frames.shape[1]) if np.any(frames[:, a])]
    pts = frames[:, slots, :, :2].reshape(-1, 2) if slots else np.zeros((1, 2))
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = 0.05 * max(float((hi - lo).max()), 1e-6)
    n = len(frame_ids)
    cols = min(ncols, n)
    rows = math.ceil(n / cols)
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(rows, cols, figsize=(1.3 * cols, 1.8 * rows), squeeze=False)
        for ax in axes.flat:
            ax.set_axis_off()
        for ax, t in zip(axes.flat, frame_ids):
            for a in slots:
                xy = frames[t, a, :, :2]
                color = ACTOR_COLORS[a % len(ACTOR_COLORS)]
                for i, j in layout.bones:
                    ax.plot(xy[[i, j], 0], xy[[i, j], 1], color=color, lw=0.8)
                ax.scatter(xy[:, 0], xy[:, 1], s=2, color=color)
            ax.set_xlim(lo[0] - pad, hi[0] + pad)
            ax.set_ylim(lo[1] - pad, hi[1] + pad)
            ax.set_aspect("equal")
            ax.set_title(f"t={t}")
        if title:
            fig.suptitle(title)
        _save(fig, path)


def render_traces(traces, filter_ids, path, title=None):
    """Filter response magnitude over time, one line per filter."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 2.4))
        for row, fid in zip(np.asarray(traces), filter_ids):
            ax.plot(row, lw=0.9, label=f"filter {fid}")
        ax.set_xlabel("frame")
        ax.set_ylabel("|response|")
        if title:
            ax.set_title(title)
        if len(filter_ids) <= 10:
            ax.legend(frameon=False, ncol=2)
        _save(fig, path)


def render_history(history, path):
    epochs = [r["epoch"] for r in history]
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(6, 2.4))
        ax1.plot(epochs, [r["train_loss"] for r in history], label="train")
        ax1.plot(epochs, [r["test_loss"] for r in history], label="test")
        ax1.set_xlabel("epoch")
        ax1.set_ylabel("loss")
        ax1.legend(frameon=False)
        ax2.plot(epochs, [r["train_acc"] for r in history], label="train")
        ax2.plot(epochs, [r["test_acc"] for r in history], label="test")
        ax2.set_xlabel("epoch")
        ax2.set_ylabel("accuracy")
        ax2.set_ylim(0, 1)
        _save(fig, path)


def render_per_class(names, columns: dict, path, flagged=()):
    """Grouped bars of per-class accuracy; ``columns`` maps label -> values."""
    k = len(names)
    width = 0.8 / max(len(columns), 1)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(4.0, 0.35 * k + 1), 2.6))
        x = np.arange(k)
        for i, (label, vals) in enumerate(columns.items()):
            ax.bar(x + i * width, vals, width, label=label)
        ax.set_xticks(x + width * (len(columns) - 1) / 2)
        ax.set_xticklabels(names, rotation=60, ha="right")
        for tick, name in zip(ax.get_xticklabels(), names):
            if name in flagged:
                tick.set_fontweight("bold")
        ax.set_ylim(0, 1)
        ax.set_ylabel("accuracy")
        ax.legend(frameon=False)
        _save(fig, path)
