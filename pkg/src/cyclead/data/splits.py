"""Balanced train/test splitting with exact replay records."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DataError, ParseError
from .images import ABNORMAL, NORMAL, LabeledImageSet


@dataclass(eq=False)
class SplitPair:
    """A train/test split whose test half is class-balanced.

    The test set holds floor(minority/2) images of each class; train holds
    everything else. Train and test are disjoint by source_id and their
    union equals the input set.
    """

    train: LabeledImageSet
    test: LabeledImageSet
    seed: int


def make_split(dataset: LabeledImageSet, seed: int) -> SplitPair:
    """Split so the test set is balanced even when the input is not.

    Half of the minority class goes to test, together with the same number
    of uniformly sampled majority images; the remainder trains.
    """
    normals = dataset.by_label(NORMAL)
    abnormals = dataset.by_label(ABNORMAL)
    if not normals or not abnormals:
        raise DataError(f"dataset {dataset.name!r} needs both classes to be split")
    minority = min(len(normals), len(abnormals))
    if minority < 2:
        raise DataError(f"dataset {dataset.name!r}: minority class has {minority} image(s), need at least 2 to split")

    m = minority // 2
    rng = np.random.default_rng(seed)
    test_ids: set[str] = set()
    for group in (normals, abnormals):
        picks = rng.choice(len(group), size=m, replace=False)
        test_ids.update(group[i].source_id for i in picks)

    train_images = [im for im in dataset.images if im.source_id not in test_ids]
    test_images = [im for im in dataset.images if im.source_id in test_ids]
    train = LabeledImageSet(train_images, name=f"{dataset.name}/train")
    test = LabeledImageSet(test_images, name=f"{dataset.name}/test")
    return SplitPair(train=train, test=test, seed=seed)


def save_split_record(split: SplitPair, path: str | Path) -> None:
    """Write the seed and per-split source_ids so the split can be replayed."""
    record = {
        "seed": split.seed,
        "train": sorted(im.source_id for im in split.train.images),
        "test": sorted(im.source_id for im in split.test.images),
    }
    Path(path).write_text(json.dumps(record, indent=2) + "\n")


def load_split_record(path: str | Path) -> dict:
    try:
        record = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid split record {path}: {exc.msg}", line=exc.lineno) from exc
    for key in ("seed", "train", "test"):
        if key not in record:
            raise ParseError(f"split record {path} is missing the {key!r} field")
    return record


def replay_split(dataset: LabeledImageSet, record: dict) -> SplitPair:
    """Rebuild a SplitPair from a stored record, by source_id."""
    test_ids = set(record["test"])
    train_ids = set(record["train"])
    missing = (test_ids | train_ids) - dataset.source_ids()
    if missing:
        raise DataError(f"split record references {len(missing)} source_ids absent from the dataset")
    train = LabeledImageSet([im for im in dataset.images if im.source_id in train_ids], name=f"{dataset.name}/train")
    test = LabeledImageSet([im for im in dataset.images if im.source_id in test_ids], name=f"{dataset.name}/test")
    return SplitPair(train=train, test=test, seed=int(record["seed"]))
