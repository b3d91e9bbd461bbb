"""Threshold selection and accuracy/AUC reporting over score files.

The decision rule is one-sided: an image is flagged abnormal when its
score is at or above the threshold. Two calibration policies are
offered, one that refuses to miss any abnormal image and one that
maximizes plain accuracy.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from statistics import fmean

import numpy as np
from scipy.stats import rankdata

from .data import ABNORMAL, NORMAL
from .errors import CalibrationError, ConfigurationError
from .scoring import ScoreRecord

METRIC_SSE = "sse"
METRIC_FID = "fid"

CALIBRATION_NOTE = (
    "thresholds were chosen on the same scores they are evaluated on; "
    "accuracies are optimistic for unseen images"
)


def zfn_threshold(abnormal_scores: list[float]) -> float:
    """Largest threshold that still flags every abnormal image.

    With the rule score >= threshold, that is simply the smallest
    abnormal score, giving recall exactly 1 on the calibration set.
    """
    if not abnormal_scores:
        raise CalibrationError("zero-false-negative calibration needs at least one abnormal score")
    return min(abnormal_scores)


def acc_threshold(normal_scores: list[float], abnormal_scores: list[float]) -> tuple[float, float]:
    """Threshold maximizing accuracy, and the accuracy it achieves.

    Candidates are -inf (flag everything) plus every observed score.
    Ties are broken toward the largest threshold, which flags less.
    """
    if not normal_scores or not abnormal_scores:
        raise CalibrationError("accuracy calibration needs scores from both classes")
    normal = np.asarray(normal_scores, dtype=np.float64)
    abnormal = np.asarray(abnormal_scores, dtype=np.float64)
    total = normal.size + abnormal.size
    best_tau = -math.inf
    best_acc = -1.0
    for tau in [-math.inf, *np.concatenate([normal, abnormal]).tolist()]:
        correct = int((normal < tau).sum()) + int((abnormal >= tau).sum())
        acc = correct / total
        if acc > best_acc or (acc == best_acc and tau > best_tau):
            best_acc = acc
            best_tau = tau
    return best_tau, best_acc


def accuracy_at(tau: float, normal_scores: list[float], abnormal_scores: list[float]) -> float:
    normal = np.asarray(normal_scores, dtype=np.float64)
    abnormal = np.asarray(abnormal_scores, dtype=np.float64)
    correct = int((normal < tau).sum()) + int((abnormal >= tau).sum())
    return correct / (normal.size + abnormal.size)


def auc_roc(normal_scores: list[float], abnormal_scores: list[float]) -> float:
    """Area under the ROC curve, ties counted half.

    Computed as the Mann-Whitney statistic through average ranks, which
    agrees with the trapezoidal area under the empirical ROC curve.
    """
    if not normal_scores or not abnormal_scores:
        raise CalibrationError("AUC needs scores from both classes")
    n_ab = len(abnormal_scores)
    n_no = len(normal_scores)
    ranks = rankdata(np.concatenate([abnormal_scores, normal_scores]))
    rank_sum = float(ranks[:n_ab].sum())
    return (rank_sum - n_ab * (n_ab + 1) / 2.0) / (n_ab * n_no)


def roc_curve(normal_scores: list[float], abnormal_scores: list[float]) -> tuple[np.ndarray, np.ndarray]:
    """Empirical (fpr, tpr) points swept from the strictest threshold down."""
    normal = np.asarray(normal_scores, dtype=np.float64)
    abnormal = np.asarray(abnormal_scores, dtype=np.float64)
    thresholds = np.unique(np.concatenate([normal, abnormal]))[::-1]
    fpr = [0.0]
    tpr = [0.0]
    for tau in thresholds:
        fpr.append(float((normal >= tau).mean()))
        tpr.append(float((abnormal >= tau).mean()))
    return np.asarray(fpr), np.asarray(tpr)


@dataclass(frozen=True)
class ThresholdReport:
    """Calibrated thresholds and resulting percentages for one score metric."""

    metric: str
    zfn_threshold: float
    zfn_accuracy: float  # percent
    acc_threshold: float
    max_accuracy: float  # percent
    auc: float  # percent


@dataclass(frozen=True)
class RunEvaluation:
    n_normal: int
    n_abnormal: int
    metrics: tuple[ThresholdReport, ...]

    def by_metric(self, name: str) -> ThresholdReport:
        for report in self.metrics:
            if report.metric == name:
                return report
        raise KeyError(name)


def _split_scores(records: list[ScoreRecord], metric: str) -> tuple[list[float], list[float]]:
    pick = (lambda r: r.sse) if metric == METRIC_SSE else (lambda r: r.fid)
    normal = [pick(r) for r in records if r.label == NORMAL]
    abnormal = [pick(r) for r in records if r.label == ABNORMAL]
    return normal, abnormal


def evaluate_run(records: list[ScoreRecord]) -> RunEvaluation:
    """Calibrate and evaluate every metric present in a run's records.

    The sum-of-squares metric is always present; the feature-distance
    metric is evaluated when every record carries one.
    """
    if not records:
        raise CalibrationError("no score records to evaluate")
    n_normal = sum(1 for r in records if r.label == NORMAL)
    n_abnormal = sum(1 for r in records if r.label == ABNORMAL)
    if n_normal == 0 or n_abnormal == 0:
        raise CalibrationError(
            f"need both classes to calibrate, got {n_normal} normal and {n_abnormal} abnormal"
        )
    with_fid = sum(1 for r in records if r.fid is not None)
    if 0 < with_fid < len(records):
        raise CalibrationError(
            f"{with_fid} of {len(records)} records carry a feature distance; expected all or none"
        )
    metric_names = [METRIC_SSE] + ([METRIC_FID] if with_fid == len(records) else [])

    reports = []
    for metric in metric_names:
        normal, abnormal = _split_scores(records, metric)
        tau_zfn = zfn_threshold(abnormal)
        tau_acc, best_acc = acc_threshold(normal, abnormal)
        reports.append(
            ThresholdReport(
                metric=metric,
                zfn_threshold=tau_zfn,
                zfn_accuracy=100.0 * accuracy_at(tau_zfn, normal, abnormal),
                acc_threshold=tau_acc,
                max_accuracy=100.0 * best_acc,
                auc=100.0 * auc_roc(normal, abnormal),
            )
        )
    return RunEvaluation(n_normal=n_normal, n_abnormal=n_abnormal, metrics=tuple(reports))


@dataclass(frozen=True)
class AggregateStat:
    mean: float
    std: float  # population standard deviation over runs
    values: tuple[float, ...]


AGGREGATE_FIELDS = ("zfn_accuracy", "max_accuracy", "auc")


@dataclass(frozen=True)
class MetricsReport:
    dataset: str
    seeds: tuple[int, ...]
    runs: tuple[RunEvaluation, ...]
    # metric name -> field name -> statistics over runs
    aggregates: dict[str, dict[str, AggregateStat]]

    @property
    def n_runs(self) -> int:
        return len(self.runs)


def _population_std(values: list[float]) -> float:
    mean = fmean(values)
    return math.sqrt(fmean([(v - mean) ** 2 for v in values]))


def aggregate_runs(runs: list[RunEvaluation], dataset: str, seeds: list[int]) -> MetricsReport:
    if not runs:
        raise CalibrationError("no runs to aggregate")
    if len(seeds) != len(runs):
        raise ConfigurationError(f"got {len(seeds)} seeds for {len(runs)} runs")
    metric_names = [r.metric for r in runs[0].metrics]
    for run in runs[1:]:
        if [r.metric for r in run.metrics] != metric_names:
            raise CalibrationError("runs do not share the same set of score metrics")
    aggregates: dict[str, dict[str, AggregateStat]] = {}
    for metric in metric_names:
        per_field = {}
        for field_name in AGGREGATE_FIELDS:
            values = [getattr(run.by_metric(metric), field_name) for run in runs]
            per_field[field_name] = AggregateStat(
                mean=fmean(values), std=_population_std(values), values=tuple(values)
            )
        aggregates[metric] = per_field
    return MetricsReport(dataset=dataset, seeds=tuple(seeds), runs=tuple(runs), aggregates=aggregates)


def report_to_json(report: MetricsReport) -> str:
    payload = {
        "dataset": report.dataset,
        "n_runs": report.n_runs,
        "seeds": list(report.seeds),
        "note": CALIBRATION_NOTE,
        "aggregates": {
            metric: {
                field_name: {"mean": stat.mean, "std": stat.std, "values": list(stat.values)}
                for field_name, stat in per_field.items()
            }
            for metric, per_field in report.aggregates.items()
        },
        "runs": [
            {
                "n_normal": run.n_normal,
                "n_abnormal": run.n_abnormal,
                "metrics": [
                    {
                        "metric": tr.metric,
                        "zfn_threshold": tr.zfn_threshold,
                        "zfn_accuracy": tr.zfn_accuracy,
                        "acc_threshold": tr.acc_threshold,
                        "max_accuracy": tr.max_accuracy,
                        "auc": tr.auc,
                    }
                    for tr in run.metrics
                ],
            }
            for run in report.runs
        ],
    }
    return json.dumps(payload, indent=2)


_COLUMNS = (
    ("zfn_accuracy", "zero-FN acc (%)"),
    ("max_accuracy", "max acc (%)"),
    ("auc", "AUC (%)"),
)


def report_to_text(report: MetricsReport) -> str:
    """Fixed-width table: one row per score metric, mean +/- std columns."""
    lines = [f"dataset: {report.dataset}    runs: {report.n_runs}    seeds: {list(report.seeds)}"]
    header = f"{'metric':<8}" + "".join(f"{label:>20}" for _, label in _COLUMNS)
    lines.append(header)
    lines.append("-" * len(header))
    for metric, per_field in report.aggregates.items():
        cells = []
        for field_name, _ in _COLUMNS:
            stat = per_field[field_name]
            cells.append(f"{stat.mean:.2f} +/- {stat.std:.2f}")
        lines.append(f"{metric:<8}" + "".join(f"{c:>20}" for c in cells))
    lines.append("")
    lines.append(f"note: {CALIBRATION_NOTE}")
    return "\n".join(lines) + "\n"
