"""Rendering of score histograms and reconstruction panels to PNG files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from PIL import Image

from .calibration import ThresholdReport
from .data import NORMAL
from .scoring import Reconstruction, ScoreRecord, difference_map


def _for_imshow(pixels: np.ndarray) -> np.ndarray:
    return pixels[:, :, 0] if pixels.shape[2] == 1 else pixels


def save_image_png(pixels: np.ndarray, path: str | Path) -> None:
    """Write one [0, 1] H x W x C array as an 8-bit PNG."""
    arr = (np.clip(pixels, 0.0, 1.0) * 255.0).round().astype(np.uint8)
    if arr.shape[2] == 1:
        arr = arr[:, :, 0]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr).save(path)


def score_histogram(
    records: list[ScoreRecord],
    report: ThresholdReport,
    path: str | Path,
    bins: int = 30,
) -> Path:
    """Class-separated histogram of one metric with both thresholds marked.

    Normal scores are drawn as a solid green outline, abnormal as a
    dashed red one; the zero-false-negative threshold is a grey vertical
    line and the max-accuracy threshold a black one.
    """
    pick = (lambda r: r.sse) if report.metric == "sse" else (lambda r: r.fid)
    normal = [pick(r) for r in records if r.label == NORMAL]
    abnormal = [pick(r) for r in records if r.label != NORMAL]
    lo = min(normal + abnormal)
    hi = max(normal + abnormal)
    if lo == hi:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.hist(normal, bins=edges, histtype="step", color="green", linestyle="solid", label="normal")
    ax.hist(abnormal, bins=edges, histtype="step", color="red", linestyle="dashed", label="abnormal")
    if np.isfinite(report.zfn_threshold):
        ax.axvline(report.zfn_threshold, color="grey", linewidth=1.2, label="zero-FN threshold")
    if np.isfinite(report.acc_threshold):
        ax.axvline(report.acc_threshold, color="black", linewidth=1.2, label="max-acc threshold")
    ax.set_xlabel(f"{report.metric} score")
    ax.set_ylabel("count")
    ax.set_title(f"{report.metric}: AUC {report.auc:.1f}%")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def reconstruction_panel(rec: Reconstruction, path: str | Path, sse: float | None = None) -> Path:
    """Original, reconstruction, and squared-residual map side by side."""
    diff = difference_map(rec.original, rec.generated)
    fig, axes = plt.subplots(1, 3, figsize=(9.0, 3.2))
    axes[0].imshow(_for_imshow(rec.original), cmap="gray", vmin=0.0, vmax=1.0)
    axes[0].set_title("input", fontsize=9)
    axes[1].imshow(_for_imshow(rec.generated), cmap="gray", vmin=0.0, vmax=1.0)
    axes[1].set_title("reconstruction", fontsize=9)
    im = axes[2].imshow(diff, cmap="inferno")
    axes[2].set_title("squared residual", fontsize=9)
    fig.colorbar(im, ax=axes[2], fraction=0.046)
    for ax in axes:
        ax.set_xticks([])
        ax.set_yticks([])
    caption = f"{rec.source_id} ({rec.label})"
    if sse is not None:
        caption += f"  sse={sse:.1f}"
    fig.suptitle(caption, fontsize=9)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
