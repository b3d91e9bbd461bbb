"""Cycle-consistent adversarial translation for image anomaly detection.

Train a pair of generators on unpaired normal/abnormal images, map test
images into the normal domain, and flag the ones whose reconstruction
differs too much from the input.
"""

from .calibration import (
    MetricsReport,
    RunEvaluation,
    ThresholdReport,
    acc_threshold,
    aggregate_runs,
    auc_roc,
    evaluate_run,
    report_to_json,
    report_to_text,
    roc_curve,
    zfn_threshold,
)
from .data import (
    ABNORMAL,
    NORMAL,
    AugmentPolicy,
    LabeledImage,
    LabeledImageSet,
    SplitPair,
    SyntheticSpec,
    augment,
    load_dataset,
    make_split,
    preprocess,
    preprocess_set,
    synthesize_toy_dataset,
)
from .errors import (
    CalibrationError,
    ConfigurationError,
    CycleadError,
    DataError,
    NumericalError,
    ParseError,
    ShapeError,
    SpecError,
)
from .experiment import (
    ExperimentManifest,
    ExperimentResult,
    demo_reconstruct,
    rebuild_report,
    run_experiment,
)
from .losses import (
    LossBreakdown,
    LossWeights,
    adversarial_loss,
    cycle_loss,
    generator_total,
    identity_loss,
    total_objective,
)
from .models import (
    CHECKPOINT_FORMAT_VERSION,
    DiscriminatorSpec,
    GeneratorSpec,
    ModelPair,
    PatchDiscriminator,
    ResnetGenerator,
    build_model_pair,
    checkpoint_hash,
    load_model_pair,
    receptive_field,
    save_model_pair,
)
from .scoring import (
    FeatureStats,
    RandomConvExtractor,
    Reconstruction,
    ScoreRecord,
    difference_map,
    extract_features,
    fid_score,
    frechet_distance,
    read_scores,
    reconstruct,
    score_set,
    sse_score,
    write_scores,
)
from .training import (
    ImageHistoryBuffer,
    TrainConfig,
    TrainResult,
    TrainState,
    load_train_state,
    lr_at,
    save_train_state,
    train,
)
from .version import __version__

__all__ = [
    "ABNORMAL",
    "NORMAL",
    "AugmentPolicy",
    "CHECKPOINT_FORMAT_VERSION",
    "CalibrationError",
    "ConfigurationError",
    "CycleadError",
    "DataError",
    "DiscriminatorSpec",
    "ExperimentManifest",
    "ExperimentResult",
    "FeatureStats",
    "GeneratorSpec",
    "ImageHistoryBuffer",
    "LabeledImage",
    "LabeledImageSet",
    "LossBreakdown",
    "LossWeights",
    "MetricsReport",
    "ModelPair",
    "NumericalError",
    "ParseError",
    "PatchDiscriminator",
    "RandomConvExtractor",
    "Reconstruction",
    "ResnetGenerator",
    "RunEvaluation",
    "ScoreRecord",
    "ShapeError",
    "SpecError",
    "SplitPair",
    "SyntheticSpec",
    "ThresholdReport",
    "TrainConfig",
    "TrainResult",
    "TrainState",
    "acc_threshold",
    "adversarial_loss",
    "aggregate_runs",
    "auc_roc",
    "augment",
    "build_model_pair",
    "checkpoint_hash",
    "cycle_loss",
    "demo_reconstruct",
    "difference_map",
    "evaluate_run",
    "extract_features",
    "fid_score",
    "frechet_distance",
    "generator_total",
    "identity_loss",
    "load_dataset",
    "load_model_pair",
    "load_train_state",
    "lr_at",
    "make_split",
    "preprocess",
    "preprocess_set",
    "read_scores",
    "rebuild_report",
    "receptive_field",
    "reconstruct",
    "report_to_json",
    "report_to_text",
    "roc_curve",
    "run_experiment",
    "save_model_pair",
    "save_train_state",
    "score_set",
    "sse_score",
    "synthesize_toy_dataset",
    "total_objective",
    "train",
    "write_scores",
    "zfn_threshold",
    "__version__",
]
