"""Deterministic SVG figure emitters.

Byte-stable output for identical input: a fixed SVG hash salt and no
embedded timestamps, so reruns diff clean.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["emit_heatmap", "emit_curves"]

_SVG_RC = {"svg.hashsalt": "holpscreen"}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(_SVG_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def emit_heatmap(m, path, title: str = "") -> Path:
    """Grayscale heatmap of a matrix (larger magnitude = darker).

    Matrices beyond 1000 on a side are subsampled by the smallest stride
    that fits; the value range maps linearly onto the gray ramp, and a
    constant matrix renders as uniform mid-gray.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"heatmap needs a 2-D matrix, got shape {m.shape}")
    stride = max(1, -(-max(m.shape) // 1000))
    m = m[::stride, ::stride]
    vmin, vmax = float(m.min()), float(m.max())
    if vmin == vmax:
        m = np.full_like(m, 0.5)
        vmin, vmax = 0.0, 1.0
    fig, ax = plt.subplots(figsize=(5.5, 5.0))
    image = ax.imshow(
        m, cmap="gray_r", vmin=vmin, vmax=vmax, interpolation="nearest", aspect="equal"
    )
    fig.colorbar(image, ax=ax, fraction=0.046, pad=0.04)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def emit_curves(series, path, title: str = "", xlabel: str = "", ylabel: str = "") -> Path:
    """Line chart of (label, x, y) series with markers, legend and axes."""
    series = list(series)
    if not series:
        raise ValueError("need at least one series")
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for label, xs, ys in series:
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        if xs.shape != ys.shape or xs.ndim != 1 or xs.size == 0:
            raise ValueError(f"series {label!r} needs matching non-empty x and y")
        ax.plot(xs, ys, marker="o", label=str(label))
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)
