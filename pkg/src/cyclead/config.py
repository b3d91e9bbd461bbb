"""Flat key-value config files and their translation into typed settings.

Format: one `key = value` per line, `#` starts a comment, blank lines
ignored. Keys mirror TrainConfig fields plus model and experiment
settings; unknown keys are rejected so typos fail loudly.
"""

from __future__ import annotations

from pathlib import Path

from .data import AugmentPolicy, SyntheticSpec
from .errors import ConfigurationError, ParseError
from .losses import LossWeights
from .models import DiscriminatorSpec, GeneratorSpec
from .training import TrainConfig


def parse_config_file(path: str | Path) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file {path} does not exist")
    values: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw!r}", line=lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ParseError(f"empty key in {raw!r}", line=lineno)
        if key in values:
            raise ParseError(f"duplicate key {key!r}", line=lineno)
        values[key] = value
    return values


_TRUE = {"true", "yes", "1", "on"}
_FALSE = {"false", "no", "0", "off"}


class ConfigView:
    """Typed, consume-tracking access to a flat string mapping."""

    def __init__(self, values: dict[str, str]):
        self._values = dict(values)
        self._seen: set[str] = set()

    def _raw(self, key: str, default):
        self._seen.add(key)
        if key not in self._values:
            return default
        return self._values[key]

    def str(self, key: str, default: str | None = None, choices: tuple[str, ...] | None = None):
        value = self._raw(key, default)
        if value is not None and choices is not None and value not in choices:
            raise ConfigurationError(f"{key} must be one of {choices}, got {value!r}")
        return value

    def int(self, key: str, default: int | None = None):
        value = self._raw(key, default)
        if value is None or isinstance(value, int):
            return value
        try:
            return int(value)
        except ValueError:
            raise ConfigurationError(f"{key} must be an integer, got {value!r}") from None

    def float(self, key: str, default: float | None = None):
        value = self._raw(key, default)
        if value is None or isinstance(value, float):
            return value
        try:
            return float(value)
        except ValueError:
            raise ConfigurationError(f"{key} must be a number, got {value!r}") from None

    def bool(self, key: str, default: bool = False):
        value = self._raw(key, default)
        if isinstance(value, bool):
            return value
        lowered = value.lower()
        if lowered in _TRUE:
            return True
        if lowered in _FALSE:
            return False
        raise ConfigurationError(f"{key} must be a boolean, got {value!r}")

    def ints(self, key: str, default: tuple[int, ...]):
        value = self._raw(key, None)
        if value is None:
            return default
        try:
            return tuple(int(part.strip()) for part in value.split(",") if part.strip())
        except ValueError:
            raise ConfigurationError(f"{key} must be comma-separated integers, got {value!r}") from None

    def reject_unknown(self) -> None:
        unknown = sorted(set(self._values) - self._seen)
        if unknown:
            raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")


def build_train_config(view: ConfigView, deterministic: bool = False) -> TrainConfig:
    epochs = view.int("epochs", 200)
    return TrainConfig(
        epochs=epochs,
        lr=view.float("lr", 2e-4),
        decay_start=view.int("decay_start", None),
        batch_size=view.int("batch_size", 1),
        buffer_size=view.int("buffer_size", 50),
        weights=LossWeights(
            lambda_cyc=view.float("lambda_cyc", 10.0),
            lambda_ide=view.float("lambda_ide", 5.0),
        ),
        seed=view.int("seed", 0),
        adversarial_mode=view.str("adversarial_mode", "least-squares", choices=("least-squares", "log")),
        checkpoint_every=view.int("checkpoint_every", 20),
        betas=(view.float("beta1", 0.5), view.float("beta2", 0.999)),
        deterministic=deterministic or view.bool("deterministic", False),
    )


def build_model_specs(view: ConfigView, force_grayscale: bool = False) -> tuple[GeneratorSpec, DiscriminatorSpec]:
    resolution = view.int("resolution")
    if resolution is None:
        raise ConfigurationError("config must set resolution")
    channels = 1 if (force_grayscale or view.bool("grayscale", False)) else 3
    gen = GeneratorSpec(
        resolution=resolution,
        in_channels=channels,
        out_channels=channels,
        base_width=view.int("base_width", 64),
        n_residual_blocks=view.int("n_residual_blocks", None),
        upsample=view.str("upsample", "transpose", choices=("transpose", "resize")),
    )
    disc = DiscriminatorSpec(
        in_channels=channels,
        widths=view.ints("disc_widths", (64, 128, 256, 512)),
    )
    return gen, disc


def build_augment_policy(view: ConfigView) -> AugmentPolicy | None:
    name = view.str("augment", "none", choices=("none", "flip", "full"))
    if name == "none":
        return None
    if name == "flip":
        return AugmentPolicy.horizontal_flip()
    return AugmentPolicy.full()


def build_synth_spec(view: ConfigView, resolution: int) -> SyntheticSpec | None:
    if not view.bool("synth", False):
        for key in ("synth_normal", "synth_abnormal", "synth_defect", "synth_contrast",
                    "synth_size", "synth_background", "synth_seed"):
            view.str(key, None)
        return None
    return SyntheticSpec(
        resolution=resolution,
        n_normal=view.int("synth_normal", 200),
        n_abnormal=view.int("synth_abnormal", 100),
        defect=view.str("synth_defect", "blob", choices=("blob", "crack", "scratch")),
        contrast=view.float("synth_contrast", 0.8),
        size=view.float("synth_size", 0.15),
        background=view.str("synth_background", "stripes", choices=("stripes", "checker", "perlin")),
        seed=view.int("synth_seed", 0),
    )


def build_manifest(values: dict[str, str], data_dir: str | None, deterministic: bool = False):
    from .experiment import ExperimentManifest

    view = ConfigView(values)
    train_cfg = build_train_config(view, deterministic)
    synth_requested = view.bool("synth", False)  # synthetic images are single-channel
    gen, disc = build_model_specs(view, force_grayscale=synth_requested)
    synth = build_synth_spec(view, gen.resolution)
    if synth is not None and data_dir is not None:
        raise ConfigurationError("config requests a synthetic dataset; do not pass --data as well")
    if synth is None and data_dir is None:
        raise ConfigurationError("pass --data <dir>, or set synth = true in the config")
    grayscale = view.bool("grayscale", False) or synth is not None
    manifest = ExperimentManifest(
        dataset_name=view.str("dataset_name", "dataset"),
        resolution=gen.resolution,
        train=train_cfg,
        gen=gen,
        disc=disc,
        dataset=data_dir,
        synth=synth,
        n_runs=view.int("n_runs", 5),
        base_seed=view.int("base_seed", 0),
        augment_policy=build_augment_policy(view),
        use_fid=view.bool("use_fid", True),
        grayscale=grayscale,
        exclude=view.str("exclude", None),
        k_panels=view.int("k_panels", 4),
        extractor_seed=view.int("extractor_seed", 0),
    )
    view.reject_unknown()
    return manifest
