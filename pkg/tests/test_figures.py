"""PNG emission for scores and reconstructions."""

import math

import numpy as np
import pytest
from PIL import Image

from cyclead.calibration import ThresholdReport
from cyclead.figures import reconstruction_panel, save_image_png, score_histogram
from cyclead.scoring import Reconstruction, ScoreRecord


def make_report(metric="sse", zfn=2.0, acc=3.0):
    return ThresholdReport(
        metric=metric,
        zfn_threshold=zfn,
        zfn_accuracy=80.0,
        acc_threshold=acc,
        max_accuracy=90.0,
        auc=95.0,
    )


def make_records(n=6):
    records = []
    for i in range(n):
        records.append(ScoreRecord(f"n{i}", "normal", sse=float(i), fid=float(i) / 2.0))
        records.append(ScoreRecord(f"a{i}", "abnormal", sse=float(i + 3), fid=float(i)))
    return records


class TestSaveImagePng:
    def test_round_trips_grayscale_values(self, tmp_path):
        pixels = np.linspace(0.0, 1.0, 16, dtype=np.float32).reshape(4, 4, 1)
        path = tmp_path / "img.png"
        save_image_png(pixels, path)
        back = np.asarray(Image.open(path), dtype=np.float64) / 255.0
        assert back.shape == (4, 4)
        np.testing.assert_allclose(back, pixels[:, :, 0], atol=0.5 / 255.0)

    def test_rgb_channels_preserved(self, tmp_path):
        pixels = np.zeros((2, 2, 3), dtype=np.float32)
        pixels[..., 0] = 1.0
        path = tmp_path / "red.png"
        save_image_png(pixels, path)
        back = np.asarray(Image.open(path))
        assert back.shape == (2, 2, 3)
        assert (back[..., 0] == 255).all()
        assert (back[..., 1:] == 0).all()

    def test_clips_out_of_range_values(self, tmp_path):
        pixels = np.array([[[-0.5]], [[1.5]]], dtype=np.float32)
        path = tmp_path / "clip.png"
        save_image_png(pixels, path)
        back = np.asarray(Image.open(path))
        assert back[0, 0] == 0 and back[1, 0] == 255

    def test_creates_parent_directories(self, tmp_path):
        path = tmp_path / "a" / "b" / "img.png"
        save_image_png(np.zeros((2, 2, 1), dtype=np.float32), path)
        assert path.is_file()


class TestScoreHistogram:
    def test_writes_a_png(self, tmp_path):
        path = score_histogram(make_records(), make_report(), tmp_path / "hist.png")
        assert path.is_file()
        assert path.stat().st_size > 0

    def test_fid_metric_uses_fid_column(self, tmp_path):
        path = score_histogram(make_records(), make_report(metric="fid"), tmp_path / "h.png")
        assert path.is_file()

    def test_infinite_threshold_is_skipped_not_drawn(self, tmp_path):
        report = make_report(acc=-math.inf)
        path = score_histogram(make_records(), report, tmp_path / "h.png")
        assert path.is_file()

    def test_degenerate_equal_scores(self, tmp_path):
        records = [
            ScoreRecord("n0", "normal", sse=1.0),
            ScoreRecord("a0", "abnormal", sse=1.0),
        ]
        path = score_histogram(records, make_report(), tmp_path / "h.png")
        assert path.is_file()


class TestReconstructionPanel:
    def test_writes_a_png(self, tmp_path):
        rng = np.random.default_rng(0)
        rec = Reconstruction(
            source_id="normal/x.png",
            label="normal",
            original=rng.uniform(0, 1, (8, 8, 1)).astype(np.float32),
            generated=rng.uniform(0, 1, (8, 8, 1)).astype(np.float32),
        )
        path = reconstruction_panel(rec, tmp_path / "panel.png", sse=12.5)
        assert path.is_file()
        assert path.stat().st_size > 0

    def test_rgb_panel(self, tmp_path):
        rec = Reconstruction(
            source_id="abnormal/y.png",
            label="abnormal",
            original=np.zeros((4, 4, 3), dtype=np.float32),
            generated=np.ones((4, 4, 3), dtype=np.float32) * 0.5,
        )
        path = reconstruction_panel(rec, tmp_path / "panel.png")
        assert path.is_file()
