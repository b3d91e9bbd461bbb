import numpy as np
import pytest
from PIL import Image

from cyclead import (
    AugmentPolicy,
    ConfigurationError,
    DataError,
    LabeledImage,
    LabeledImageSet,
    SyntheticSpec,
    augment,
    load_dataset,
    make_split,
    preprocess,
    synthesize_toy_dataset,
)
from cyclead.data import (
    apply_transform,
    load_split_record,
    read_exclusion_manifest,
    replay_split,
    save_split_record,
)
from cyclead.errors import SpecError

from conftest import make_set


def _write_png(path, value=0.5, size=12, channels=3):
    arr = np.full((size, size, channels) if channels == 3 else (size, size), int(value * 255), np.uint8)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr).save(path)


class TestLabeledImage:
    def test_promotes_2d_to_single_channel(self):
        im = LabeledImage(np.zeros((4, 4), dtype=np.float32), "normal", "x")
        assert im.pixels.shape == (4, 4, 1)
        assert im.channels == 1

    def test_rejects_out_of_range(self):
        with pytest.raises(DataError):
            LabeledImage(np.full((4, 4, 1), 1.5, np.float32), "normal", "x")

    def test_rejects_bad_channel_count(self):
        with pytest.raises(DataError):
            LabeledImage(np.zeros((4, 4, 2), np.float32), "normal", "x")

    def test_rejects_unknown_label(self):
        with pytest.raises(DataError):
            LabeledImage(np.zeros((4, 4, 1), np.float32), "weird", "x")


class TestLoadDataset:
    def test_counts_by_subdirectory(self, tmp_path):
        for i in range(3):
            _write_png(tmp_path / "normal" / f"n{i}.png")
        for i in range(2):
            _write_png(tmp_path / "abnormal" / f"a{i}.png")
        dataset = load_dataset(tmp_path)
        assert dataset.counts() == (3, 2)
        assert dataset.load_report.n_loaded == 5
        assert not dataset.load_report.skipped

    def test_missing_abnormal_dir(self, tmp_path):
        _write_png(tmp_path / "normal" / "n0.png")
        with pytest.raises(ConfigurationError):
            load_dataset(tmp_path)

    def test_corrupt_file_is_skipped_and_reported(self, tmp_path):
        for i in range(2):
            _write_png(tmp_path / "normal" / f"n{i}.png")
        _write_png(tmp_path / "abnormal" / "a0.png")
        (tmp_path / "normal" / "broken.png").write_bytes(b"not a png")
        with pytest.warns(UserWarning, match="broken.png"):
            dataset = load_dataset(tmp_path)
        assert len(dataset) == 3
        assert len(dataset.load_report.skipped) == 1
        assert "broken.png" in dataset.load_report.skipped[0][0]

    def test_empty_class_errors(self, tmp_path):
        (tmp_path / "normal").mkdir(parents=True)
        (tmp_path / "abnormal").mkdir()
        _write_png(tmp_path / "normal" / "n0.png")
        with pytest.raises(DataError):
            load_dataset(tmp_path)

    def test_subclass_directories_merge_with_metadata(self, tmp_path):
        _write_png(tmp_path / "normal" / "n0.png")
        _write_png(tmp_path / "abnormal" / "cracks" / "a0.png")
        _write_png(tmp_path / "abnormal" / "holes" / "a1.png")
        dataset = load_dataset(tmp_path)
        subclasses = {im.metadata.get("subclass") for im in dataset.by_label("abnormal")}
        assert subclasses == {"cracks", "holes"}

    def test_exclusion_manifest(self, tmp_path):
        for i in range(3):
            _write_png(tmp_path / "normal" / f"n{i}.png")
        _write_png(tmp_path / "abnormal" / "a0.png")
        manifest = tmp_path / "exclude.txt"
        manifest.write_text("normal/n1.png\n")
        dataset = load_dataset(tmp_path, exclude=read_exclusion_manifest(manifest))
        assert dataset.counts() == (2, 1)
        assert dataset.load_report.excluded == ["normal/n1.png"]

    def test_grayscale_flag(self, tmp_path):
        _write_png(tmp_path / "normal" / "n0.png")
        _write_png(tmp_path / "abnormal" / "a0.png")
        dataset = load_dataset(tmp_path, grayscale=True)
        assert all(im.channels == 1 for im in dataset)


class TestMakeSplit:
    def test_hazelnut_counts(self):
        data = make_set(431, 70, resolution=4)
        split = make_split(data, seed=0)
        assert split.train.counts() == (396, 35)
        assert split.test.counts() == (35, 35)

    def test_brain_mri_counts(self):
        data = make_set(98, 155, resolution=4)
        split = make_split(data, seed=0)
        assert split.train.counts() == (49, 106)
        assert split.test.counts() == (49, 49)

    def test_four_four_halves(self):
        data = make_set(4, 4, resolution=4)
        split = make_split(data, seed=0)
        assert split.train.counts() == (2, 2)
        assert split.test.counts() == (2, 2)
        assert split.train.source_ids().isdisjoint(split.test.source_ids())

    def test_invariants_on_random_counts(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            n_no = int(rng.integers(2, 40))
            n_ab = int(rng.integers(2, 40))
            data = make_set(n_no, n_ab, resolution=4)
            split = make_split(data, seed=int(rng.integers(0, 1000)))
            m = min(n_no, n_ab) // 2
            assert split.test.counts() == (m, m)
            assert split.train.source_ids().isdisjoint(split.test.source_ids())
            assert split.train.source_ids() | split.test.source_ids() == data.source_ids()

    def test_minority_too_small(self):
        data = make_set(5, 1, resolution=4)
        with pytest.raises(DataError):
            make_split(data, seed=0)

    def test_seed_determinism(self):
        data = make_set(10, 9, resolution=4)
        a = make_split(data, seed=3)
        b = make_split(data, seed=3)
        assert a.test.source_ids() == b.test.source_ids()
        c = make_split(data, seed=4)
        assert a.test.source_ids() != c.test.source_ids()

    def test_record_round_trip(self, tmp_path):
        data = make_set(8, 6, resolution=4)
        split = make_split(data, seed=11)
        save_split_record(split, tmp_path / "split.json")
        record = load_split_record(tmp_path / "split.json")
        replayed = replay_split(data, record)
        assert replayed.test.source_ids() == split.test.source_ids()
        assert replayed.train.source_ids() == split.train.source_ids()
        assert replayed.seed == 11


class TestPreprocess:
    def test_downsamples_large_input(self):
        im = LabeledImage(np.random.default_rng(0).uniform(0, 1, (1024, 1024, 3)).astype(np.float32), "normal", "big")
        out = preprocess(im, 256)
        assert out.pixels.shape == (256, 256, 3)
        assert out.label == "normal" and out.source_id == "big"

    def test_identity_at_matching_resolution(self):
        im = LabeledImage(np.random.default_rng(1).uniform(0, 1, (64, 64, 1)).astype(np.float32), "normal", "x")
        out = preprocess(im, 64)
        assert np.abs(out.pixels - im.pixels).max() <= 1e-6

    def test_constant_stays_constant(self):
        im = LabeledImage(np.full((37, 37, 1), 0.5, np.float32), "abnormal", "c")
        out = preprocess(im, 16)
        assert np.allclose(out.pixels, 0.5, atol=1e-6)

    def test_rejects_nonpositive_resolution(self):
        im = LabeledImage(np.zeros((8, 8, 1), np.float32), "normal", "x")
        with pytest.raises(ConfigurationError):
            preprocess(im, 0)


class TestAugment:
    def test_full_policy_multiplier_is_nine(self):
        policy = AugmentPolicy.full()
        assert policy.multiplier == 9
        data = make_set(5, 5, resolution=8)
        out = augment(data, policy)
        assert len(out) == 90

    def test_identity_policy_preserves_pixels(self):
        data = make_set(3, 2, resolution=8)
        out = augment(data, AugmentPolicy.identity())
        assert len(out) == 5
        for before, after in zip(data, out):
            assert np.array_equal(before.pixels, after.pixels)
            assert after.label == before.label

    def test_horizontal_flip_policy_doubles(self):
        data = make_set(6, 4, resolution=8)
        out = augment(data, AugmentPolicy.horizontal_flip())
        assert len(out) == 20

    def test_transforms_are_exact_bijections(self):
        rng = np.random.default_rng(2)
        pixels = rng.uniform(0, 1, (8, 8, 1)).astype(np.float32)
        for transform in AugmentPolicy.full().transforms:
            moved = apply_transform(pixels, transform)
            assert moved.shape == pixels.shape
            assert np.array_equal(np.sort(moved.ravel()), np.sort(pixels.ravel()))

    def test_labels_preserved_and_order_deterministic(self):
        data = make_set(2, 2, resolution=8)
        a = augment(data, AugmentPolicy.full())
        b = augment(data, AugmentPolicy.full())
        assert [im.source_id for im in a] == [im.source_id for im in b]
        assert all(im.label in ("normal", "abnormal") for im in a)

    def test_empty_policy_rejected(self):
        data = make_set(1, 1, resolution=8)
        with pytest.raises(ConfigurationError):
            augment(data, AugmentPolicy(transforms=()))


class TestSynthetic:
    def test_seeded_determinism(self):
        spec = SyntheticSpec(resolution=32, n_normal=4, n_abnormal=4, defect="blob",
                             contrast=0.8, size=0.15, background="stripes", seed=7)
        a = synthesize_toy_dataset(spec)
        b = synthesize_toy_dataset(spec)
        for im_a, im_b in zip(a, b):
            assert np.array_equal(im_a.pixels, im_b.pixels)
            assert im_a.source_id == im_b.source_id

    def test_zero_contrast_defect_is_invisible(self):
        spec = SyntheticSpec(resolution=32, n_normal=1, n_abnormal=3, contrast=0.0, size=0.2, seed=1)
        data = synthesize_toy_dataset(spec)
        for im in data.by_label("abnormal"):
            assert im.label == "abnormal"
            assert im.metadata["mask"].any()

    def test_masks_only_on_abnormal(self):
        spec = SyntheticSpec(resolution=16, n_normal=3, n_abnormal=3, size=0.25, seed=0)
        data = synthesize_toy_dataset(spec)
        for im in data:
            if im.label == "normal":
                assert "mask" not in im.metadata
            else:
                assert im.metadata["mask"].dtype == bool
                assert im.metadata["mask"].any()

    @pytest.mark.parametrize("kind", ["blob", "crack", "scratch"])
    def test_mask_area_tracks_size_fraction(self, kind):
        fraction = 0.25
        areas = []
        for seed in range(4):
            spec = SyntheticSpec(resolution=32, n_normal=1, n_abnormal=10, defect=kind,
                                 contrast=0.8, size=fraction, seed=seed)
            for im in synthesize_toy_dataset(spec).by_label("abnormal"):
                mask = im.metadata["mask"]
                areas.append(mask.sum() / mask.size)
        assert min(areas) >= 0.5 * fraction**2
        assert max(areas) <= 2.0 * fraction**2

    def test_sub_pixel_defect_rejected(self):
        with pytest.raises(SpecError):
            SyntheticSpec(resolution=8, n_normal=1, n_abnormal=1, size=0.1)

    def test_backgrounds_render(self):
        for background in ("stripes", "checker", "perlin"):
            spec = SyntheticSpec(resolution=16, n_normal=2, n_abnormal=1, size=0.3,
                                 background=background, seed=0)
            data = synthesize_toy_dataset(spec)
            assert len(data) == 3
            for im in data:
                assert im.pixels.min() >= 0.0 and im.pixels.max() <= 1.0


def test_image_set_counts_are_constant_time_bookkeeping():
    data = make_set(7, 5, resolution=4)
    assert data.counts() == (7, 5)
    assert len(data.by_label("normal")) == 7
    assert len(data) == 12


def test_set_requires_valid_images():
    with pytest.raises(DataError):
        LabeledImageSet([LabeledImage(np.zeros((2, 2, 1)) - 1.0, "normal", "bad")])
