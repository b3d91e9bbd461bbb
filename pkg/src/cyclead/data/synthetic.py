"""Synthetic defect datasets for desk-scale experiments.

Normal images are procedural grayscale textures; abnormal images are the
same textures with exactly one injected defect and a ground-truth mask in
the image metadata.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..errors import SpecError
from .images import ABNORMAL, NORMAL, LabeledImage, LabeledImageSet

DEFECT_KINDS = ("blob", "crack", "scratch")
BACKGROUND_KINDS = ("stripes", "checker", "perlin")


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for one synthetic dataset; fully determined by its seed."""

    resolution: int
    n_normal: int
    n_abnormal: int
    defect: str = "blob"
    contrast: float = 0.8
    size: float = 0.15  # defect mask area is about size**2 of the image area
    background: str = "stripes"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.resolution < 8:
            raise SpecError(f"resolution must be at least 8, got {self.resolution}")
        if self.n_normal < 1 or self.n_abnormal < 1:
            raise SpecError("n_normal and n_abnormal must both be at least 1")
        if self.defect not in DEFECT_KINDS:
            raise SpecError(f"defect must be one of {DEFECT_KINDS}, got {self.defect!r}")
        if self.background not in BACKGROUND_KINDS:
            raise SpecError(f"background must be one of {BACKGROUND_KINDS}, got {self.background!r}")
        if not 0.0 <= self.contrast <= 1.0:
            raise SpecError(f"contrast must lie in [0, 1], got {self.contrast}")
        if not 0.0 < self.size < 0.5:
            raise SpecError(f"defect size fraction must lie in (0, 0.5), got {self.size}")
        if (self.size * self.resolution) ** 2 < 1.0:
            raise SpecError(
                f"defect of size fraction {self.size} covers less than one pixel at resolution {self.resolution}"
            )


def _background(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    n = spec.resolution
    yy, xx = np.mgrid[0:n, 0:n].astype(np.float64)
    if spec.background == "stripes":
        angle = rng.uniform(0, np.pi)
        wavelength = rng.uniform(0.18, 0.4) * n
        phase = rng.uniform(0, 2 * np.pi)
        u = np.cos(angle) * xx + np.sin(angle) * yy
        bg = 0.5 + 0.25 * np.sin(2 * np.pi * u / wavelength + phase)
    elif spec.background == "checker":
        cell = max(2, int(round(rng.uniform(0.12, 0.25) * n)))
        ox, oy = rng.integers(0, cell, size=2)
        parity = ((xx + ox) // cell + (yy + oy) // cell) % 2
        lo, hi = 0.35 + rng.uniform(-0.05, 0.05), 0.65 + rng.uniform(-0.05, 0.05)
        bg = np.where(parity > 0, hi, lo)
    else:  # perlin-like: smooth upsampled low-resolution noise
        cells = rng.integers(4, 8)
        coarse = rng.uniform(0.0, 1.0, size=(cells, cells))
        bg = ndimage.zoom(coarse, n / cells, order=3, mode="reflect", grid_mode=True)[:n, :n]
        lo, hi = bg.min(), bg.max()
        bg = 0.25 + 0.5 * (bg - lo) / max(hi - lo, 1e-9)
    return np.clip(bg, 0.0, 1.0)


def _ellipse_mask(n: int, area: float, rng: np.random.Generator) -> np.ndarray:
    area *= rng.uniform(0.85, 1.2)
    aspect = rng.uniform(0.6, 1.6)
    a = np.sqrt(area * aspect / np.pi)
    b = np.sqrt(area / (aspect * np.pi))
    theta = rng.uniform(0, np.pi)
    margin = max(a, b) + 1
    cx = rng.uniform(margin, n - margin) if n > 2 * margin else n / 2
    cy = rng.uniform(margin, n - margin) if n > 2 * margin else n / 2
    yy, xx = np.mgrid[0:n, 0:n].astype(np.float64)
    dx, dy = xx - cx, yy - cy
    u = np.cos(theta) * dx + np.sin(theta) * dy
    v = -np.sin(theta) * dx + np.cos(theta) * dy
    return (u / a) ** 2 + (v / b) ** 2 <= 1.0


def _path_mask(n: int, points: np.ndarray, thickness: float) -> np.ndarray:
    yy, xx = np.mgrid[0:n, 0:n].astype(np.float64)
    dist = np.full((n, n), np.inf)
    for (x0, y0), (x1, y1) in zip(points[:-1], points[1:]):
        vx, vy = x1 - x0, y1 - y0
        norm2 = vx * vx + vy * vy
        if norm2 == 0:
            dx, dy = xx - x0, yy - y0
        else:
            t = np.clip(((xx - x0) * vx + (yy - y0) * vy) / norm2, 0.0, 1.0)
            dx, dy = xx - (x0 + t * vx), yy - (y0 + t * vy)
        dist = np.minimum(dist, dx * dx + dy * dy)
    return dist <= (thickness / 2.0) ** 2


def _line_points(n: int, area: float, kind: str, rng: np.random.Generator) -> tuple[np.ndarray, float]:
    length = (3.0 if kind == "crack" else 4.0) * np.sqrt(area)
    length = min(length, 0.85 * n)
    thickness = max(1.0, area / length)
    margin = length / 2 + thickness + 1
    margin = min(margin, n / 2 - 1)
    cx = rng.uniform(margin, n - margin)
    cy = rng.uniform(margin, n - margin)
    angle = rng.uniform(0, np.pi)
    if kind == "scratch":
        half = np.array([np.cos(angle), np.sin(angle)]) * length / 2
        points = np.array([[cx, cy] - half, [cx, cy] + half])
    else:  # crack: jittered polyline
        n_seg = 4
        step = length / n_seg
        pts = [np.array([cx, cy]) - np.array([np.cos(angle), np.sin(angle)]) * length / 2]
        heading = angle
        for _ in range(n_seg):
            heading += rng.uniform(-0.5, 0.5)
            pts.append(pts[-1] + np.array([np.cos(heading), np.sin(heading)]) * step)
        points = np.clip(np.array(pts), 1, n - 2)
    return points, thickness


def _defect_mask(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    n = spec.resolution
    area = (spec.size * n) ** 2
    if spec.defect == "blob":
        mask = _ellipse_mask(n, area, rng)
    else:
        points, thickness = _line_points(n, area, spec.defect, rng)
        mask = _path_mask(n, points, thickness)
    if not mask.any():
        # Degenerate rasterization; guarantee at least the center pixel.
        mask[n // 2, n // 2] = True
    return mask


def _inject_defect(bg: np.ndarray, mask: np.ndarray, contrast: float) -> np.ndarray:
    # Push pixels toward whichever extreme is farther from the local mean.
    direction = -1.0 if bg[mask].mean() > 0.5 else 1.0
    out = bg.copy()
    out[mask] = np.clip(out[mask] + direction * contrast, 0.0, 1.0)
    return out


def synthesize_toy_dataset(spec: SyntheticSpec) -> LabeledImageSet:
    """Generate a labeled set of spec.n_normal + spec.n_abnormal images.

    Deterministic under spec.seed. Abnormal images carry their ground-truth
    defect mask under metadata["mask"]; normal images never do.
    """
    master = np.random.SeedSequence(spec.seed)
    children = master.spawn(spec.n_normal + spec.n_abnormal)
    images: list[LabeledImage] = []
    for i in range(spec.n_normal):
        rng = np.random.default_rng(children[i])
        bg = _background(spec, rng).astype(np.float32)
        images.append(LabeledImage(bg[:, :, None], NORMAL, f"synth-{spec.seed}-normal-{i:04d}"))
    for i in range(spec.n_abnormal):
        rng = np.random.default_rng(children[spec.n_normal + i])
        bg = _background(spec, rng)
        mask = _defect_mask(spec, rng)
        pixels = _inject_defect(bg, mask, spec.contrast).astype(np.float32)
        images.append(
            LabeledImage(
                pixels[:, :, None],
                ABNORMAL,
                f"synth-{spec.seed}-abnormal-{i:04d}",
                {"mask": mask, "defect": spec.defect},
            )
        )
    return LabeledImageSet(images, name=f"synthetic-{spec.background}-{spec.defect}")
