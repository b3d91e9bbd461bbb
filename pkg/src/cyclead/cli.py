"""Command-line interface.

Exit codes: 0 success, 2 configuration problems, 3 data problems,
4 numerical failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .calibration import (
    acc_threshold,
    accuracy_at,
    evaluate_run,
    report_to_text,
    zfn_threshold,
)
from .config import (
    ConfigView,
    build_augment_policy,
    build_manifest,
    build_model_specs,
    build_train_config,
    parse_config_file,
)
from .data import (
    NORMAL,
    augment,
    load_dataset,
    load_split_record,
    make_split,
    preprocess_set,
    read_exclusion_manifest,
    replay_split,
    save_split_record,
    synthesize_toy_dataset,
)
from .data.synthetic import SyntheticSpec
from .errors import ConfigurationError, DataError, NumericalError
from .experiment import demo_reconstruct, emit_report, rebuild_report, run_experiment
from .figures import save_image_png, score_histogram
from .models import CHECKPOINT_FORMAT_VERSION, checkpoint_hash, load_model_pair
from .scoring import RandomConvExtractor, read_scores, score_set, write_scores
from .training import train
from .version import __version__

logger = logging.getLogger("cyclead")

VERSION_LINE = f"cyclead {__version__} (checkpoint format {CHECKPOINT_FORMAT_VERSION})"


def cmd_train(args) -> int:
    values = parse_config_file(args.config)
    view = ConfigView(values)
    cfg = build_train_config(view, deterministic=args.deterministic)
    gen, disc = build_model_specs(view)
    policy = build_augment_policy(view)
    exclude_path = view.str("exclude", None)
    view.reject_unknown()

    exclude = read_exclusion_manifest(exclude_path) if exclude_path else None
    dataset = load_dataset(args.data, grayscale=gen.in_channels == 1, exclude=exclude)
    logger.info("%s", dataset.load_report.summary())
    dataset = preprocess_set(dataset, gen.resolution)
    split = make_split(dataset, seed=cfg.seed)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_split_record(split, out / "split.json")
    if policy is not None:
        split = type(split)(train=augment(split.train, policy), test=split.test, seed=split.seed)

    result = train(
        cfg,
        split,
        gen,
        disc,
        ckpt_dir=out / "ckpt",
        log_path=out / "log.csv",
        resume_from=args.resume,
    )
    final = result.final_checkpoint
    if result.log_rows:
        last = result.log_rows[-1]
        print(f"trained to epoch {last[1]} ({last[0]} iterations), final generator loss {last[8]:.4f}")
    else:
        print("nothing to do: checkpoint is already at the configured epoch count")
    if final is not None:
        print(f"final checkpoint: {final}")
    return 0


def cmd_reconstruct(args) -> int:
    scores = demo_reconstruct(args.ckpt, args.image, args.out)
    print(f"sse {scores['sse']:.6g}")
    print(f"fid {scores['fid']:.6g}")
    print(f"panels written to {args.out}")
    return 0


def cmd_score(args) -> int:
    ckpt = Path(args.ckpt)
    pair, _extra = load_model_pair(ckpt)
    grayscale = pair.generator_spec.in_channels == 1
    dataset = load_dataset(args.data, grayscale=grayscale)
    logger.info("%s", dataset.load_report.summary())
    dataset = preprocess_set(dataset, pair.generator_spec.resolution)
    if args.split is not None:
        record = load_split_record(args.split)
        images = replay_split(dataset, record).test.images
    else:
        images = dataset.images
    extractor = None
    if not args.no_fid:
        extractor = RandomConvExtractor(
            in_channels=pair.generator_spec.in_channels, seed=args.extractor_seed
        )
    records, _ = score_set(pair.G, images, extractor)
    write_scores(args.out, records, checkpoint_hash(ckpt))
    print(f"scored {len(records)} images -> {args.out}")
    return 0


def cmd_calibrate(args) -> int:
    records, _meta = read_scores(args.scores)
    pick = (lambda r: r.sse) if args.metric == "sse" else (lambda r: r.fid)
    if args.metric == "fid" and any(r.fid is None for r in records):
        raise DataError("scores file has no feature-distance column to calibrate on")
    normal = [pick(r) for r in records if r.label == NORMAL]
    abnormal = [pick(r) for r in records if r.label != NORMAL]
    if args.policy == "zfn":
        tau = zfn_threshold(abnormal)
        acc = accuracy_at(tau, normal, abnormal)
    else:
        tau, acc = acc_threshold(normal, abnormal)
    print(f"policy {args.policy} metric {args.metric} threshold {tau!r} accuracy {100.0 * acc:.2f}%")
    return 0


def cmd_evaluate(args) -> int:
    records, meta = read_scores(args.scores)
    evaluation = evaluate_run(records)
    payload = {
        "scores_file": str(args.scores),
        "checkpoint_hash": meta["checkpoint_hash"],
        "n_normal": evaluation.n_normal,
        "n_abnormal": evaluation.n_abnormal,
        "metrics": [
            {
                "metric": tr.metric,
                "zfn_threshold": tr.zfn_threshold,
                "zfn_accuracy": tr.zfn_accuracy,
                "acc_threshold": tr.acc_threshold,
                "max_accuracy": tr.max_accuracy,
                "auc": tr.auc,
            }
            for tr in evaluation.metrics
        ],
    }
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(json.dumps(payload, indent=2))
    for tr in evaluation.metrics:
        print(
            f"{tr.metric}: zfn acc {tr.zfn_accuracy:.2f}%  max acc {tr.max_accuracy:.2f}%  "
            f"auc {tr.auc:.2f}%"
        )
    print(f"report written to {args.out}")
    return 0


def cmd_report(args) -> int:
    report = rebuild_report(args.runs)
    out = Path(args.out)
    json_path, text_path = emit_report(out, report)
    runs_dir = Path(args.runs)
    run_dirs = sorted(
        (p for p in runs_dir.glob("run_*") if p.is_dir() and p.name[4:].isdigit()),
        key=lambda p: int(p.name[4:]),
    )
    for run_dir in run_dirs:
        records, _meta = read_scores(run_dir / "scores.csv")
        evaluation = evaluate_run(records)
        for tr in evaluation.metrics:
            score_histogram(records, tr, out / "figs" / f"{run_dir.name}_hist_{tr.metric}.png")
    sys.stdout.write(report_to_text(report))
    print(f"report written to {json_path} and {text_path}")
    return 0


def cmd_experiment(args) -> int:
    values = parse_config_file(args.config)
    manifest = build_manifest(values, args.data, deterministic=args.deterministic)
    result = run_experiment(manifest, args.out)
    sys.stdout.write(report_to_text(result.report))
    print(f"outputs under {result.out_dir}")
    return 0


def cmd_synth(args) -> int:
    spec = SyntheticSpec(
        resolution=args.resolution,
        n_normal=args.normal,
        n_abnormal=args.abnormal,
        defect=args.defect,
        contrast=args.contrast,
        size=args.size,
        background=args.background,
        seed=args.seed,
    )
    dataset = synthesize_toy_dataset(spec)
    out = Path(args.out)
    counters = {"normal": 0, "abnormal": 0}
    for image in dataset:
        index = counters[image.label]
        counters[image.label] += 1
        stem = f"{image.label}_{index:04d}"
        save_image_png(image.pixels, out / image.label / f"{stem}.png")
        mask = image.metadata.get("mask")
        if args.write_masks and mask is not None:
            save_image_png(mask.astype(float)[:, :, None], out / "masks" / f"{stem}.png")
    print(f"wrote {counters['normal']} normal and {counters['abnormal']} abnormal images to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cyclead",
        description=(
            "Cycle-consistent adversarial translation for image anomaly detection: "
            "train, reconstruct, score, calibrate, and report."
        ),
    )
    parser.add_argument("--version", action="version", version=VERSION_LINE)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a generator/discriminator pair on one split")
    p.add_argument("--config", required=True, help="flat key-value config file")
    p.add_argument("--data", required=True, help="dataset root with normal/ and abnormal/")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--resume", default=None, help="checkpoint to continue from")
    p.add_argument("--deterministic", action="store_true", help="force deterministic kernels")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("reconstruct", help="run one image through the trained translator")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("score", help="score a directory of images against a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="scores file to write")
    p.add_argument("--split", default=None, help="split record; scores only its test ids")
    p.add_argument("--no-fid", action="store_true", help="skip the feature-distance score")
    p.add_argument("--extractor-seed", type=int, default=0)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("calibrate", help="pick a threshold from a scores file")
    p.add_argument("--scores", required=True)
    p.add_argument("--policy", required=True, choices=("zfn", "acc"))
    p.add_argument("--metric", default="sse", choices=("sse", "fid"))
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("evaluate", help="calibrate and evaluate every metric in a scores file")
    p.add_argument("--scores", required=True)
    p.add_argument("--out", required=True, help="structured report file to write")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="aggregate stored runs into tables and plots")
    p.add_argument("--runs", required=True, help="experiment output directory")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("experiment", help="run seeded splits end to end and aggregate")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--data", default=None, help="dataset root; omit when the config sets synth")
    p.add_argument("--deterministic", action="store_true")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("synth", help="generate a toy dataset with known defect masks")
    p.add_argument("--out", required=True)
    p.add_argument("--resolution", type=int, default=32)
    p.add_argument("--normal", type=int, default=200)
    p.add_argument("--abnormal", type=int, default=100)
    p.add_argument("--defect", default="blob", choices=("blob", "crack", "scratch"))
    p.add_argument("--contrast", type=float, default=0.8)
    p.add_argument("--size", type=float, default=0.15)
    p.add_argument("--background", default="stripes", choices=("stripes", "checker", "perlin"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--write-masks", action="store_true", help="also save defect masks as PNGs")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
