"""Reconstruction of test images and discrepancy scoring.

A trained abnormal-to-normal generator should leave normal images nearly
untouched while repainting defects, so the distance between an input and
its reconstruction separates the classes. Two distances are provided:
raw sum of squared errors in pixel space, and a Frechet distance between
Gaussian fits of feature activations.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .data import LABELS, LabeledImage
from .errors import ConfigurationError, NumericalError, ParseError, ShapeError
from .models import ResnetGenerator
from .training import batch_to_images, images_to_batch
from .version import __version__

SCORES_HEADER = ("source_id", "label", "sse", "fid")

# Eigenvalues of covariance products dip slightly negative in floating
# point; magnitudes below this are treated as exact zeros.
EIG_CLIP = 1e-12


@dataclass(frozen=True)
class Reconstruction:
    source_id: str
    label: str
    original: np.ndarray  # H x W x C in [0, 1]
    generated: np.ndarray


@dataclass(frozen=True)
class ScoreRecord:
    source_id: str
    label: str
    sse: float
    fid: float | None = None


def reconstruct(generator: ResnetGenerator, image: LabeledImage) -> Reconstruction:
    spec = generator.spec
    if image.resolution != (spec.resolution, spec.resolution) or image.channels != spec.in_channels:
        raise ShapeError(
            f"image {image.source_id!r} is {image.resolution} x {image.channels} channels; "
            f"the generator expects {spec.resolution}x{spec.resolution} x {spec.in_channels}"
        )
    generator.eval()
    with torch.no_grad():
        batch = images_to_batch([image])
        out = generator(batch)
    return Reconstruction(
        source_id=image.source_id,
        label=image.label,
        original=image.pixels,
        generated=batch_to_images(out)[0],
    )


def reconstruct_set(generator: ResnetGenerator, images: list[LabeledImage]) -> list[Reconstruction]:
    return [reconstruct(generator, image) for image in images]


def difference_map(original: np.ndarray, generated: np.ndarray) -> np.ndarray:
    """Per-pixel squared residual, summed over channels, as float64 H x W."""
    if original.shape != generated.shape:
        raise ShapeError(
            f"original and generated shapes differ: {original.shape} vs {generated.shape}"
        )
    residual = original.astype(np.float64) - generated.astype(np.float64)
    return np.square(residual).sum(axis=-1)


def sse_score(original: np.ndarray, generated: np.ndarray) -> float:
    """Unnormalized sum of squared errors on the [0, 1] pixel scale."""
    return float(difference_map(original, generated).sum())


def display_difference_map(original: np.ndarray, generated: np.ndarray) -> np.ndarray:
    """Max-scaled copy of the difference map, for rendering only."""
    raw = difference_map(original, generated)
    peak = raw.max()
    return raw / peak if peak > 0 else raw


@dataclass(frozen=True)
class FeatureStats:
    """Gaussian fit (mean and unbiased covariance) of feature activations."""

    mu: np.ndarray
    sigma: np.ndarray
    n_samples: int

    def __post_init__(self) -> None:
        if self.mu.ndim != 1 or self.sigma.shape != (self.mu.size, self.mu.size):
            raise ConfigurationError(
                f"mean of size {self.mu.shape} does not match covariance {self.sigma.shape}"
            )
        if not np.allclose(self.sigma, self.sigma.T, atol=1e-8):
            raise NumericalError("covariance matrix is not symmetric")
        lo = float(np.linalg.eigvalsh(self.sigma).min())
        if lo < -1e-6:
            raise NumericalError(f"covariance matrix has eigenvalue {lo:.3e} below tolerance")


def _feature_map(extractor, image: np.ndarray) -> np.ndarray:
    """Run the extractor on one [0, 1] H x W x C image, returning C' x H' x W'."""
    if isinstance(extractor, nn.Module):
        with torch.no_grad():
            tensor = torch.from_numpy(image.astype(np.float32)).permute(2, 0, 1)[None] * 2.0 - 1.0
            out = extractor(tensor)
        return out[0].numpy().astype(np.float64)
    out = np.asarray(extractor(image), dtype=np.float64)
    if out.ndim != 3:
        raise ConfigurationError(f"feature extractor must return C x H x W, got shape {out.shape}")
    return out


def extract_features(extractor, image: np.ndarray) -> FeatureStats:
    """Fit a Gaussian over the spatial positions of the extractor's output.

    Each of the H' * W' positions contributes one C'-dimensional sample.
    """
    fmap = _feature_map(extractor, image)
    channels = fmap.shape[0]
    rows = fmap.reshape(channels, -1).T
    if rows.shape[0] < 2:
        raise NumericalError(
            f"need at least 2 spatial samples to estimate covariance, got {rows.shape[0]}"
        )
    mu = rows.mean(axis=0)
    sigma = np.cov(rows, rowvar=False)
    sigma = np.atleast_2d(sigma)
    return FeatureStats(mu=mu, sigma=sigma, n_samples=rows.shape[0])


def frechet_distance(a: FeatureStats, b: FeatureStats) -> float:
    """Squared Frechet distance between two Gaussian fits.

    The trace of the matrix square root of sigma_a . sigma_b is computed
    through eigendecompositions of symmetric matrices, clipping the tiny
    negative eigenvalues that arise in floating point.
    """
    if a.mu.shape != b.mu.shape:
        raise ShapeError(f"feature dimensions differ: {a.mu.shape} vs {b.mu.shape}")
    delta = a.mu - b.mu
    mean_term = float(delta @ delta)

    vals_a, vecs_a = np.linalg.eigh(a.sigma)
    vals_a = np.clip(vals_a, 0.0, None)
    root_a = (vecs_a * np.sqrt(vals_a)) @ vecs_a.T
    inner = root_a @ b.sigma @ root_a
    inner = (inner + inner.T) / 2.0
    vals = np.linalg.eigvalsh(inner)
    vals = np.where(vals < EIG_CLIP, np.maximum(vals, 0.0), vals)
    trace_sqrt = float(np.sqrt(vals).sum())

    d2 = mean_term + float(np.trace(a.sigma)) + float(np.trace(b.sigma)) - 2.0 * trace_sqrt
    if not np.isfinite(d2):
        raise NumericalError(f"Frechet distance is not finite: {d2}")
    if d2 < -1e-6:
        raise NumericalError(
            f"Frechet distance {d2:.3e} is negative beyond rounding tolerance; "
            f"covariance traces {np.trace(a.sigma):.3e}/{np.trace(b.sigma):.3e}, "
            f"sqrt trace {trace_sqrt:.3e}"
        )
    return max(d2, 0.0)


def fid_score(extractor, original: np.ndarray, generated: np.ndarray) -> float:
    """Frechet distance between the feature statistics of one image pair."""
    return frechet_distance(extract_features(extractor, original), extract_features(extractor, generated))


class RandomConvExtractor(nn.Module):
    """Frozen random convolutions used as a lightweight feature extractor.

    Random projections preserve distances well enough for relative
    comparisons, and need no pretrained weights. Two stride-2 layers
    shrink the spatial grid while keeping plenty of positions for the
    covariance estimate.
    """

    def __init__(self, in_channels: int = 3, channels: int = 8, seed: int = 0):
        super().__init__()
        self.layers = nn.Sequential(
            nn.Conv2d(in_channels, channels, kernel_size=3, stride=2, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(channels, channels, kernel_size=3, stride=2, padding=1),
            nn.ReLU(inplace=True),
        )
        gen = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            for m in self.layers:
                if isinstance(m, nn.Conv2d):
                    fan_in = m.in_channels * m.kernel_size[0] * m.kernel_size[1]
                    m.weight.normal_(0.0, (2.0 / fan_in) ** 0.5, generator=gen)
                    m.bias.zero_()
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.layers(x)


def inception_extractor():
    """Pretrained Inception features for parity with common FID tooling.

    Requires torchvision and a weights download, so it is constructed
    lazily and never used by default.
    """
    try:
        from torchvision.models import Inception_V3_Weights, inception_v3
    except ImportError as exc:
        raise ConfigurationError(
            "torchvision is required for the pretrained feature extractor"
        ) from exc

    net = inception_v3(weights=Inception_V3_Weights.DEFAULT, aux_logits=True)
    net.fc = nn.Identity()
    net.eval()
    for p in net.parameters():
        p.requires_grad_(False)

    class _Wrapper(nn.Module):
        def __init__(self, body):
            super().__init__()
            self.body = body

        def forward(self, x: torch.Tensor) -> torch.Tensor:
            if x.shape[1] == 1:
                x = x.repeat(1, 3, 1, 1)
            x = nn.functional.interpolate(x, size=(299, 299), mode="bilinear", align_corners=False)
            feats = self.body(x)
            return feats[:, :, None, None]

    return _Wrapper(net)


def score_reconstruction(rec: Reconstruction, extractor=None) -> ScoreRecord:
    fid = None
    if extractor is not None:
        fid = fid_score(extractor, rec.original, rec.generated)
    return ScoreRecord(
        source_id=rec.source_id,
        label=rec.label,
        sse=sse_score(rec.original, rec.generated),
        fid=fid,
    )


def score_set(
    generator: ResnetGenerator, images: list[LabeledImage], extractor=None
) -> tuple[list[ScoreRecord], list[Reconstruction]]:
    recs = reconstruct_set(generator, images)
    return [score_reconstruction(r, extractor) for r in recs], recs


def write_scores(path: str | Path, records: list[ScoreRecord], checkpoint_hash: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        handle.write(f"# cyclead {__version__} checkpoint {checkpoint_hash}\n")
        writer = csv.writer(handle)
        writer.writerow(SCORES_HEADER)
        for rec in records:
            fid_cell = "" if rec.fid is None else repr(rec.fid)
            writer.writerow([rec.source_id, rec.label, repr(rec.sse), fid_cell])


def read_scores(path: str | Path) -> tuple[list[ScoreRecord], dict]:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"scores file {path} does not exist")
    with path.open() as handle:
        lines = handle.read().splitlines()
    if not lines or not lines[0].startswith("# cyclead "):
        raise ParseError("missing '# cyclead <version> checkpoint <hash>' header", line=1)
    parts = lines[0].split()
    if len(parts) != 5 or parts[3] != "checkpoint":
        raise ParseError(f"malformed header {lines[0]!r}", line=1)
    meta = {"version": parts[2], "checkpoint_hash": parts[4]}
    if len(lines) < 2 or tuple(lines[1].split(",")) != SCORES_HEADER:
        raise ParseError(f"expected column header {','.join(SCORES_HEADER)!r}", line=2)
    records = []
    for lineno, row in enumerate(csv.reader(lines[2:]), start=3):
        if not row:
            continue
        if len(row) not in (3, 4):
            raise ParseError(f"expected 3 or 4 fields, got {len(row)}", line=lineno)
        source_id, label = row[0], row[1]
        if label not in LABELS:
            raise ParseError(f"unknown label {label!r}", line=lineno)
        try:
            sse = float(row[2])
        except ValueError:
            raise ParseError(f"sse value {row[2]!r} is not a number", line=lineno) from None
        fid = None
        if len(row) == 4 and row[3] != "":
            try:
                fid = float(row[3])
            except ValueError:
                raise ParseError(f"fid value {row[3]!r} is not a number", line=lineno) from None
        records.append(ScoreRecord(source_id=source_id, label=label, sse=sse, fid=fid))
    return records, meta
