"""Deterministic rotation/flip augmentation on the exact pixel grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from .images import LabeledImage, LabeledImageSet

FLIP_NONE = "none"
FLIP_HORIZONTAL = "horizontal"
FLIP_VERTICAL = "vertical"
FLIPS = (FLIP_NONE, FLIP_HORIZONTAL, FLIP_VERTICAL)
ROTATIONS = (0, 90, 180, 270)

Transform = tuple[int, str]  # (rotation degrees CCW, flip applied after rotating)


@dataclass(frozen=True)
class AugmentPolicy:
    """An ordered list of (rotation, flip) transforms.

    The multiplier is the length of the realized transform list; duplicate
    transforms are permitted (augmentation is sampling, not deduplication).
    """

    transforms: tuple[Transform, ...]

    def __post_init__(self) -> None:
        for rot, flip in self.transforms:
            if rot not in ROTATIONS:
                raise ConfigurationError(f"rotation must be one of {ROTATIONS}, got {rot}")
            if flip not in FLIPS:
                raise ConfigurationError(f"flip must be one of {FLIPS}, got {flip!r}")

    @property
    def multiplier(self) -> int:
        return len(self.transforms)

    @property
    def rotations(self) -> tuple[int, ...]:
        return tuple(sorted({rot for rot, _ in self.transforms}))

    @property
    def flips(self) -> tuple[str, ...]:
        seen = {flip for _, flip in self.transforms}
        return tuple(f for f in FLIPS if f in seen)

    @classmethod
    def identity(cls) -> "AugmentPolicy":
        return cls(((0, FLIP_NONE),))

    @classmethod
    def horizontal_flip(cls) -> "AugmentPolicy":
        """Identity plus a horizontal flip (multiplier 2)."""
        return cls(((0, FLIP_NONE), (0, FLIP_HORIZONTAL)))

    @classmethod
    def full(cls) -> "AugmentPolicy":
        """All rotations and flips along both axes, multiplier 9.

        The eight dihedral transforms (four rotations, each plain and
        horizontally flipped; a flipped 180-degree rotation is the vertical
        flip) plus the identity once more.
        """
        dihedral = tuple((rot, flip) for flip in (FLIP_NONE, FLIP_HORIZONTAL) for rot in ROTATIONS)
        return cls(dihedral + ((0, FLIP_NONE),))

    @classmethod
    def cross(cls, rotations: tuple[int, ...], flips: tuple[str, ...]) -> "AugmentPolicy":
        """Every rotation combined with every flip, in the given order."""
        return cls(tuple((rot, flip) for flip in flips for rot in rotations))


def apply_transform(pixels: np.ndarray, transform: Transform) -> np.ndarray:
    """Rotate then flip. 90-degree rotations and axis flips permute pixels
    exactly; no interpolation is involved."""
    rot, flip = transform
    out = np.rot90(pixels, k=rot // 90, axes=(0, 1)) if rot else pixels
    if flip == FLIP_HORIZONTAL:
        out = out[:, ::-1]
    elif flip == FLIP_VERTICAL:
        out = out[::-1, :]
    return np.ascontiguousarray(out)


def _transform_tag(transform: Transform, occurrence: int) -> str:
    rot, flip = transform
    tag = f"r{rot}" + {FLIP_NONE: "", FLIP_HORIZONTAL: "h", FLIP_VERTICAL: "v"}[flip]
    if occurrence:
        tag += f"+{occurrence}"
    return tag


def augment(dataset: LabeledImageSet, policy: AugmentPolicy) -> LabeledImageSet:
    """Expand a set to len(dataset) * policy.multiplier transformed images.

    Ordering is deterministic: input order, then policy order. Labels are
    preserved, and any ground-truth mask in the metadata is transformed
    alongside the pixels.
    """
    if not policy.transforms:
        raise ConfigurationError("augmentation policy realizes no transforms")
    counts: dict[Transform, int] = {}
    tags = []
    for t in policy.transforms:
        tags.append(_transform_tag(t, counts.get(t, 0)))
        counts[t] = counts.get(t, 0) + 1

    out: list[LabeledImage] = []
    for image in dataset.images:
        for transform, tag in zip(policy.transforms, tags):
            metadata = dict(image.metadata)
            mask = metadata.get("mask")
            if isinstance(mask, np.ndarray):
                metadata["mask"] = apply_transform(mask, transform)
            out.append(
                LabeledImage(
                    apply_transform(image.pixels, transform),
                    image.label,
                    f"{image.source_id}#{tag}",
                    metadata,
                )
            )
    return LabeledImageSet(out, name=f"{dataset.name}/augmented")
