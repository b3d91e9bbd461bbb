"""Dataset loading, splitting, augmentation, and synthesis."""

from .augment import FLIPS, ROTATIONS, AugmentPolicy, apply_transform, augment
from .images import (
    ABNORMAL,
    IMAGE_EXTENSIONS,
    LABELS,
    NORMAL,
    LabeledImage,
    LabeledImageSet,
    LoadReport,
    load_dataset,
    preprocess,
    preprocess_set,
    read_exclusion_manifest,
)
from .splits import SplitPair, load_split_record, make_split, replay_split, save_split_record
from .synthetic import BACKGROUND_KINDS, DEFECT_KINDS, SyntheticSpec, synthesize_toy_dataset

__all__ = [
    "ABNORMAL",
    "AugmentPolicy",
    "BACKGROUND_KINDS",
    "DEFECT_KINDS",
    "FLIPS",
    "IMAGE_EXTENSIONS",
    "LABELS",
    "LabeledImage",
    "LabeledImageSet",
    "LoadReport",
    "NORMAL",
    "ROTATIONS",
    "SplitPair",
    "SyntheticSpec",
    "apply_transform",
    "augment",
    "load_dataset",
    "load_split_record",
    "make_split",
    "preprocess",
    "preprocess_set",
    "read_exclusion_manifest",
    "replay_split",
    "save_split_record",
    "synthesize_toy_dataset",
]
