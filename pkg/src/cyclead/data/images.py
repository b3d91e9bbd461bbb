"""Labeled image containers, disk loading, and bicubic preprocessing."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from PIL import Image

from ..errors import ConfigurationError, DataError

NORMAL = "normal"
ABNORMAL = "abnormal"
LABELS = (NORMAL, ABNORMAL)

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".tif", ".bmp")

# Pillow's bicubic filter uses the Catmull-Rom kernel (a = -0.5).
RESAMPLE_KERNEL = "bicubic(a=-0.5)"


@dataclass(eq=False)
class LabeledImage:
    """A single image tagged normal or abnormal.

    pixels are float32 H x W x C with intensities in [0, 1]; C is 1
    (grayscale) or 3 (color). source_id identifies provenance (file path
    or synthetic seed tag). metadata carries optional extras such as
    ground-truth defect masks or abnormal sub-class names.
    """

    pixels: np.ndarray
    label: str
    source_id: str
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels, dtype=np.float32)
        if px.ndim == 2:
            px = px[:, :, None]
        if px.ndim != 3 or px.shape[0] < 1 or px.shape[1] < 1:
            raise DataError(f"image {self.source_id!r}: expected H x W x C pixels, got shape {px.shape}")
        if px.shape[2] not in (1, 3):
            raise DataError(f"image {self.source_id!r}: channel count must be 1 or 3, got {px.shape[2]}")
        if px.size and (px.min() < 0.0 or px.max() > 1.0):
            raise DataError(f"image {self.source_id!r}: intensities must lie in [0, 1]")
        if self.label not in LABELS:
            raise DataError(f"image {self.source_id!r}: unknown label {self.label!r}")
        self.pixels = px

    @property
    def resolution(self) -> tuple[int, int]:
        return self.pixels.shape[0], self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


@dataclass
class LoadReport:
    """What happened while reading a dataset directory."""

    root: str
    n_loaded: int = 0
    skipped: list[tuple[str, str]] = field(default_factory=list)
    excluded: list[str] = field(default_factory=list)
    resample_kernel: str = RESAMPLE_KERNEL

    def summary(self) -> str:
        lines = [
            f"root: {self.root}",
            f"loaded: {self.n_loaded}",
            f"excluded: {len(self.excluded)}",
            f"skipped: {len(self.skipped)}",
            f"resample kernel: {self.resample_kernel}",
        ]
        lines += [f"  skip {path}: {reason}" for path, reason in self.skipped]
        return "\n".join(lines)


@dataclass(eq=False)
class LabeledImageSet:
    """An ordered collection of labeled images."""

    images: list[LabeledImage]
    name: str = "dataset"
    load_report: LoadReport | None = None

    def __post_init__(self) -> None:
        self._n_normal = sum(1 for im in self.images if im.label == NORMAL)
        self._n_abnormal = len(self.images) - self._n_normal

    def __len__(self) -> int:
        return len(self.images)

    def __iter__(self):
        return iter(self.images)

    @property
    def n_normal(self) -> int:
        return self._n_normal

    @property
    def n_abnormal(self) -> int:
        return self._n_abnormal

    def counts(self) -> tuple[int, int]:
        """(n_normal, n_abnormal), maintained at construction time."""
        return self._n_normal, self._n_abnormal

    def by_label(self, label: str) -> list[LabeledImage]:
        return [im for im in self.images if im.label == label]

    def source_ids(self) -> set[str]:
        return {im.source_id for im in self.images}


def _read_image(path: Path, grayscale: bool) -> np.ndarray:
    with Image.open(path) as img:
        img = img.convert("L" if grayscale else "RGB")
        arr = np.asarray(img, dtype=np.float32) / 255.0
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def _class_files(class_dir: Path) -> list[tuple[Path, str | None]]:
    """Image files directly in class_dir plus one nested level.

    A nested directory name is kept as the abnormal sub-class tag; all
    sub-classes are merged into the single class label.
    """
    out: list[tuple[Path, str | None]] = []
    for entry in sorted(class_dir.iterdir()):
        if entry.is_file() and entry.suffix.lower() in IMAGE_EXTENSIONS:
            out.append((entry, None))
        elif entry.is_dir():
            for sub in sorted(entry.iterdir()):
                if sub.is_file() and sub.suffix.lower() in IMAGE_EXTENSIONS:
                    out.append((sub, entry.name))
    return out


def read_exclusion_manifest(path: str | Path) -> set[str]:
    """Plain-text manifest: one source_id per line, # starts a comment."""
    ids: set[str] = set()
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            ids.add(line)
    return ids


def load_dataset(
    root: str | Path,
    grayscale: bool = False,
    exclude: set[str] | None = None,
    name: str | None = None,
) -> LabeledImageSet:
    """Load a <root>/{normal,abnormal}/ directory tree.

    Every readable image file appears exactly once with the label of its
    subdirectory; intensities are rescaled to [0, 1]. Unreadable files are
    skipped with a warning and recorded in the attached load report.
    """
    root = Path(root)
    if not root.is_dir():
        raise ConfigurationError(f"dataset root {root} is not a directory")
    for sub in LABELS:
        if not (root / sub).is_dir():
            raise ConfigurationError(f"dataset root {root} is missing the {sub}/ subdirectory")

    exclude = exclude or set()
    report = LoadReport(root=str(root))
    images: list[LabeledImage] = []
    for label in LABELS:
        for path, subclass in _class_files(root / label):
            source_id = path.relative_to(root).as_posix()
            if source_id in exclude:
                report.excluded.append(source_id)
                continue
            try:
                pixels = _read_image(path, grayscale)
            except Exception as exc:  # noqa: BLE001 - any decode failure is a skip
                reason = f"{type(exc).__name__}: {exc}"
                warnings.warn(f"skipping unreadable image {path}: {reason}", stacklevel=2)
                report.skipped.append((source_id, reason))
                continue
            metadata = {"subclass": subclass} if subclass else {}
            images.append(LabeledImage(pixels, label, source_id, metadata))
    report.n_loaded = len(images)

    dataset = LabeledImageSet(images, name=name or root.name, load_report=report)
    for label, count in zip(LABELS, dataset.counts()):
        if count == 0:
            raise DataError(f"dataset {root} contains no readable {label} images")
    return dataset


def _resize_channel(channel: np.ndarray, resolution: int) -> np.ndarray:
    img = Image.fromarray(np.ascontiguousarray(channel, dtype=np.float32), mode="F")
    img = img.resize((resolution, resolution), Image.Resampling.BICUBIC)
    return np.asarray(img, dtype=np.float32)


def preprocess(image: LabeledImage, resolution: int) -> LabeledImage:
    """Bicubic-resample to resolution x resolution, clamped to [0, 1].

    Label, source_id, and metadata are preserved. Resampling an image that
    already has the target resolution is an identity up to float rounding.
    """
    if resolution <= 0:
        raise ConfigurationError(f"resolution must be positive, got {resolution}")
    channels = [_resize_channel(image.pixels[:, :, c], resolution) for c in range(image.channels)]
    pixels = np.clip(np.stack(channels, axis=-1), 0.0, 1.0)
    return LabeledImage(pixels, image.label, image.source_id, dict(image.metadata))


def preprocess_set(dataset: LabeledImageSet, resolution: int) -> LabeledImageSet:
    return LabeledImageSet(
        [preprocess(im, resolution) for im in dataset.images],
        name=dataset.name,
        load_report=dataset.load_report,
    )
