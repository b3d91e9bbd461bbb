"""End-to-end experiment driver: seeded runs, artifact layout, figures.

Layout under the output directory:

    run_<i>/ckpt/        checkpoints for run i (split seeded base+i)
    run_<i>/split.json   the ids drawn for that run
    run_<i>/scores.csv   per-image scores over the test set
    run_<i>/log.csv      training loss log
    run_<i>/figs/        histograms and reconstruction panels
    report.json          aggregate metrics, machine-readable
    report.txt           the same table for humans
    manifest.json        what produced all of the above

Everything in report.* is recomputable from the stored scores.csv files,
so figures never carry numbers that the data files do not.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from .calibration import (
    MetricsReport,
    RunEvaluation,
    aggregate_runs,
    evaluate_run,
    report_to_json,
    report_to_text,
)
from .data import (
    AugmentPolicy,
    LabeledImage,
    LabeledImageSet,
    SyntheticSpec,
    augment,
    load_dataset,
    load_split_record,
    make_split,
    preprocess,
    preprocess_set,
    read_exclusion_manifest,
    save_split_record,
    synthesize_toy_dataset,
)
from .data.splits import SplitPair
from .errors import ConfigurationError, CycleadError, DataError, NumericalError
from .figures import reconstruction_panel, save_image_png, score_histogram
from .models import (
    DiscriminatorSpec,
    GeneratorSpec,
    checkpoint_hash,
    load_model_pair,
)
from .scoring import (
    RandomConvExtractor,
    Reconstruction,
    ScoreRecord,
    difference_map,
    read_scores,
    reconstruct,
    score_set,
    sse_score,
    write_scores,
)
from .training import TrainConfig, train

logger = logging.getLogger("cyclead")


@dataclass(frozen=True)
class ExperimentManifest:
    """Everything needed to reproduce an experiment byte-for-byte."""

    dataset_name: str
    resolution: int
    train: TrainConfig
    gen: GeneratorSpec
    disc: DiscriminatorSpec
    dataset: str | None = None  # directory with normal/ and abnormal/
    synth: SyntheticSpec | None = None  # or generate the dataset
    n_runs: int = 5
    base_seed: int = 0
    augment_policy: AugmentPolicy | None = None
    use_fid: bool = True
    grayscale: bool = False
    exclude: str | None = None
    k_panels: int = 4
    extractor_seed: int = 0

    def __post_init__(self) -> None:
        if (self.dataset is None) == (self.synth is None):
            raise ConfigurationError("exactly one of a dataset path or a synthetic spec is required")
        if self.n_runs < 1:
            raise ConfigurationError(f"n_runs must be at least 1, got {self.n_runs}")
        if self.k_panels < 0:
            raise ConfigurationError(f"k_panels must be non-negative, got {self.k_panels}")
        if self.gen.resolution != self.resolution:
            raise ConfigurationError(
                f"generator expects {self.gen.resolution}, manifest says {self.resolution}"
            )
        channels = 1 if (self.synth is not None or self.grayscale) else 3
        if self.gen.in_channels != channels:
            raise ConfigurationError(
                f"generator takes {self.gen.in_channels} channels but the dataset provides {channels}"
            )


@dataclass
class ExperimentResult:
    report: MetricsReport
    out_dir: Path
    run_dirs: list[Path]
    evaluations: list[RunEvaluation] = field(default_factory=list)


def _reraise(stage: str, run_index: int, exc: Exception):
    prefix = f"run {run_index}, stage {stage}"
    for cls in (ConfigurationError, DataError, NumericalError):
        if isinstance(exc, cls):
            raise cls(f"{prefix}: {exc}") from exc
    raise CycleadError(f"{prefix}: {exc}") from exc


def _load_images(manifest: ExperimentManifest) -> LabeledImageSet:
    if manifest.synth is not None:
        return synthesize_toy_dataset(manifest.synth)
    exclude = read_exclusion_manifest(manifest.exclude) if manifest.exclude else None
    dataset = load_dataset(
        manifest.dataset, grayscale=manifest.grayscale, exclude=exclude, name=manifest.dataset_name
    )
    logger.info("loaded dataset:\n%s", dataset.load_report.summary())
    return dataset


def _safe_name(source_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", source_id).strip("_")[-60:]


def _render_run_figures(
    figs_dir: Path,
    records: list[ScoreRecord],
    recs: list[Reconstruction],
    evaluation: RunEvaluation,
    k_panels: int,
) -> None:
    for report in evaluation.metrics:
        score_histogram(records, report, figs_dir / f"hist_{report.metric}.png")
    by_id = {r.source_id: r for r in recs}
    ordered = sorted(records, key=lambda r: r.sse)
    chosen = []
    if k_panels:
        chosen += [("lo", r) for r in ordered[:k_panels]]
        chosen += [("hi", r) for r in ordered[-k_panels:]]
    for tag, record in chosen:
        rec = by_id[record.source_id]
        name = f"panel_{tag}_{_safe_name(record.source_id)}.png"
        reconstruction_panel(rec, figs_dir / name, sse=record.sse)


def execute_run(
    manifest: ExperimentManifest,
    images: LabeledImageSet,
    run_index: int,
    run_dir: Path,
) -> tuple[RunEvaluation, SplitPair]:
    """One seeded split/train/score/calibrate pass, writing run_dir."""
    seed = manifest.base_seed + run_index

    stage = "split"
    try:
        split = make_split(images, seed=seed)
        run_dir.mkdir(parents=True, exist_ok=True)
        save_split_record(split, run_dir / "split.json")
    except Exception as exc:
        _reraise(stage, run_index, exc)

    stage = "train"
    try:
        train_set = split.train
        if manifest.augment_policy is not None:
            train_set = augment(train_set, manifest.augment_policy)
        cfg = dataclasses.replace(manifest.train, seed=seed)
        result = train(
            cfg,
            SplitPair(train=train_set, test=split.test, seed=seed),
            manifest.gen,
            manifest.disc,
            ckpt_dir=run_dir / "ckpt",
            log_path=run_dir / "log.csv",
        )
    except Exception as exc:
        _reraise(stage, run_index, exc)

    stage = "score"
    try:
        extractor = None
        if manifest.use_fid:
            extractor = RandomConvExtractor(
                in_channels=manifest.gen.in_channels, seed=manifest.extractor_seed
            )
        records, recs = score_set(result.state.pair.G, split.test.images, extractor)
        ckpt = result.final_checkpoint
        write_scores(run_dir / "scores.csv", records, checkpoint_hash(ckpt) if ckpt else "none")
    except Exception as exc:
        _reraise(stage, run_index, exc)

    stage = "calibrate"
    try:
        evaluation = evaluate_run(records)
    except Exception as exc:
        _reraise(stage, run_index, exc)

    stage = "figures"
    try:
        _render_run_figures(run_dir / "figs", records, recs, evaluation, manifest.k_panels)
    except Exception as exc:
        _reraise(stage, run_index, exc)

    return evaluation, split


def _manifest_payload(manifest: ExperimentManifest) -> dict:
    payload = dataclasses.asdict(manifest)
    payload["train"]["betas"] = list(manifest.train.betas)
    if manifest.augment_policy is not None:
        payload["augment_policy"] = [list(t) for t in manifest.augment_policy.transforms]
    return payload


def run_experiment(manifest: ExperimentManifest, out_dir: str | Path) -> ExperimentResult:
    """Run n_runs seeded splits end to end and aggregate their metrics.

    A failure in any stage halts the experiment; directories of completed
    runs are left as they are.
    """
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    (out_path / "manifest.json").write_text(json.dumps(_manifest_payload(manifest), indent=2))

    images = _load_images(manifest)
    images = preprocess_set(images, manifest.resolution)

    evaluations: list[RunEvaluation] = []
    run_dirs: list[Path] = []
    seeds: list[int] = []
    for i in range(manifest.n_runs):
        run_dir = out_path / f"run_{i}"
        evaluation, _split = execute_run(manifest, images, i, run_dir)
        evaluations.append(evaluation)
        run_dirs.append(run_dir)
        seeds.append(manifest.base_seed + i)
        logger.info("run %d done: %s", i, evaluation.metrics[0])

    report = aggregate_runs(evaluations, dataset=manifest.dataset_name, seeds=seeds)
    (out_path / "report.json").write_text(report_to_json(report))
    (out_path / "report.txt").write_text(report_to_text(report))
    return ExperimentResult(report=report, out_dir=out_path, run_dirs=run_dirs, evaluations=evaluations)


def rebuild_report(out_dir: str | Path, dataset_name: str | None = None) -> MetricsReport:
    """Regenerate the aggregate report purely from stored run outputs."""
    out_path = Path(out_dir)
    run_dirs = sorted(
        (p for p in out_path.glob("run_*") if p.is_dir() and p.name[4:].isdigit()),
        key=lambda p: int(p.name[4:]),
    )
    if not run_dirs:
        raise DataError(f"no run_<i> directories under {out_path}")
    if dataset_name is None:
        manifest_path = out_path / "manifest.json"
        if manifest_path.is_file():
            dataset_name = json.loads(manifest_path.read_text()).get("dataset_name", out_path.name)
        else:
            dataset_name = out_path.name
    evaluations = []
    seeds = []
    for run_dir in run_dirs:
        records, _meta = read_scores(run_dir / "scores.csv")
        evaluations.append(evaluate_run(records))
        record = load_split_record(run_dir / "split.json")
        seeds.append(int(record["seed"]))
    return aggregate_runs(evaluations, dataset=dataset_name, seeds=seeds)


def emit_report(out_dir: str | Path, report: MetricsReport) -> tuple[Path, Path]:
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    json_path = out_path / "report.json"
    text_path = out_path / "report.txt"
    json_path.write_text(report_to_json(report))
    text_path.write_text(report_to_text(report))
    return json_path, text_path


def _load_single_image(path: Path, channels: int) -> LabeledImage:
    from .data.images import _read_image  # same reader the dataset loader uses

    label = "abnormal" if "abnormal" in path.parts else "normal"
    pixels = _read_image(path, grayscale=(channels == 1))
    return LabeledImage(pixels, label, str(path))


def demo_reconstruct(
    checkpoint: str | Path,
    image_path: str | Path,
    out_dir: str | Path,
    extractor_seed: int = 0,
) -> dict[str, float]:
    """Reconstruct one image and write panels plus a score sidecar.

    Emits original.png, generated.png, difference.png, panel.png, and
    scores.txt into out_dir. Images whose resolution does not match the
    checkpointed generator are resampled first, with a logged notice.
    """
    checkpoint = Path(checkpoint)
    image_path = Path(image_path)
    if not image_path.is_file():
        raise DataError(f"image {image_path} does not exist")
    pair, _extra = load_model_pair(checkpoint)

    image = _load_single_image(image_path, pair.generator_spec.in_channels)
    target = pair.generator_spec.resolution
    if image.resolution != (target, target):
        logger.warning(
            "resampling %s from %sx%s to %dx%d to match the checkpoint",
            image_path,
            image.resolution[0],
            image.resolution[1],
            target,
            target,
        )
        image = preprocess(image, target)

    rec = reconstruct(pair.G, image)
    sse = sse_score(rec.original, rec.generated)
    extractor = RandomConvExtractor(in_channels=pair.generator_spec.in_channels, seed=extractor_seed)
    from .scoring import fid_score

    fid = fid_score(extractor, rec.original, rec.generated)

    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    save_image_png(rec.original, out_path / "original.png")
    save_image_png(rec.generated, out_path / "generated.png")
    diff = difference_map(rec.original, rec.generated) / rec.original.shape[2]
    save_image_png(diff[:, :, None].clip(0.0, 1.0), out_path / "difference.png")
    reconstruction_panel(rec, out_path / "panel.png", sse=sse)
    (out_path / "scores.txt").write_text(f"sse {sse!r}\nfid {fid!r}\n")
    return {"sse": sse, "fid": fid}
