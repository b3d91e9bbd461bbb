"""Alternating min-max training with history buffers and resumable state."""

from __future__ import annotations

import math
import random
from dataclasses import asdict, dataclass, field
from itertools import chain
from pathlib import Path
from typing import Callable

import numpy as np
import torch

from .data import ABNORMAL, NORMAL, LabeledImage, SplitPair
from .errors import ConfigurationError, NumericalError
from .losses import (
    ADVERSARIAL_MODES,
    DISCRIMINATOR_MAXIMIZES,
    MODE_LEAST_SQUARES,
    MODE_LOG,
    SIDE_DISCRIMINATOR,
    SIDE_GENERATOR,
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
    build_model_pair,
)

LOG_HEADER = ("iteration", "epoch") + LossBreakdown.FIELDS


@dataclass(frozen=True)
class TrainConfig:
    """Optimization schedule and loss settings."""

    epochs: int = 200
    lr: float = 2e-4
    decay_start: int | None = None  # default: epochs // 2
    batch_size: int = 1
    buffer_size: int = 50
    weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 0
    adversarial_mode: str = MODE_LEAST_SQUARES
    checkpoint_every: int = 20
    betas: tuple[float, float] = (0.5, 0.999)
    deterministic: bool = False

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be at least 1, got {self.epochs}")
        if self.decay_start is None:
            object.__setattr__(self, "decay_start", max(1, self.epochs // 2))
        if not 0 < self.decay_start <= self.epochs:
            raise ConfigurationError(f"decay_start must lie in (0, epochs], got {self.decay_start}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be at least 1, got {self.batch_size}")
        if self.buffer_size < 0:
            raise ConfigurationError(f"buffer_size must be non-negative, got {self.buffer_size}")
        if self.lr <= 0:
            raise ConfigurationError(f"lr must be positive, got {self.lr}")
        if self.adversarial_mode not in ADVERSARIAL_MODES:
            raise ConfigurationError(f"adversarial_mode must be one of {ADVERSARIAL_MODES}")
        if self.checkpoint_every < 1:
            raise ConfigurationError(f"checkpoint_every must be at least 1, got {self.checkpoint_every}")


def lr_at(epoch: int, cfg: TrainConfig) -> float:
    """Learning rate for a 1-indexed epoch.

    Constant until decay_start, then decays linearly, hitting zero one
    epoch past the schedule so the final epoch keeps a positive rate.
    """
    if not 1 <= epoch <= cfg.epochs:
        raise ConfigurationError(f"epoch {epoch} outside [1, {cfg.epochs}]")
    if epoch <= cfg.decay_start:
        return cfg.lr
    return cfg.lr * (1.0 - (epoch - cfg.decay_start) / (cfg.epochs - cfg.decay_start + 1))


class ImageHistoryBuffer:
    """Pool of previously generated images fed to the discriminators.

    Until the pool fills, every pushed image is stored and returned as-is.
    Afterwards each push returns the new image with probability 1/2, or
    swaps it with a uniformly chosen stored image and returns the evictee.
    """

    def __init__(self, capacity: int, rng: random.Random):
        self.capacity = capacity
        self.rng = rng
        self.images: list[torch.Tensor] = []

    def push(self, image: torch.Tensor) -> torch.Tensor:
        if self.capacity == 0:
            return image
        if len(self.images) < self.capacity:
            self.images.append(image.detach().clone())
            return image
        if self.rng.random() < 0.5:
            return image
        idx = self.rng.randrange(self.capacity)
        evictee = self.images[idx]
        self.images[idx] = image.detach().clone()
        return evictee

    def push_batch(self, batch: torch.Tensor) -> torch.Tensor:
        return torch.stack([self.push(batch[i]) for i in range(batch.shape[0])])


def history_push_sample(buffer: ImageHistoryBuffer, image: torch.Tensor) -> torch.Tensor:
    return buffer.push(image)


@dataclass(eq=False)
class TrainState:
    """Everything needed to continue training bit-identically."""

    pair: ModelPair
    opt_g: torch.optim.Adam
    opt_d: torch.optim.Adam
    buffer_x: ImageHistoryBuffer
    buffer_y: ImageHistoryBuffer
    rng: random.Random
    cfg: TrainConfig
    epoch: int = 0


@dataclass
class TrainResult:
    state: TrainState
    log_rows: list[tuple]
    checkpoint_paths: list[Path]

    @property
    def final_checkpoint(self) -> Path | None:
        return self.checkpoint_paths[-1] if self.checkpoint_paths else None


def _set_requires_grad(modules, flag: bool) -> None:
    for module in modules:
        for p in module.parameters():
            p.requires_grad_(flag)


def images_to_batch(images: list[LabeledImage]) -> torch.Tensor:
    """Stack [0, 1] images into an NCHW tensor on the model's [-1, 1] scale."""
    arr = np.stack([im.pixels for im in images]).astype(np.float32)
    return torch.from_numpy(arr).permute(0, 3, 1, 2) * 2.0 - 1.0


def batch_to_images(batch: torch.Tensor) -> np.ndarray:
    """NCHW [-1, 1] tensor back to NHWC [0, 1] float32 pixels."""
    arr = batch.detach().permute(0, 2, 3, 1).numpy().astype(np.float32)
    return np.clip((arr + 1.0) / 2.0, 0.0, 1.0)


def init_train_state(cfg: TrainConfig, gen_spec: GeneratorSpec, disc_spec: DiscriminatorSpec) -> TrainState:
    pair = build_model_pair(gen_spec, disc_spec, seed=cfg.seed)
    opt_g = torch.optim.Adam(chain(pair.G.parameters(), pair.F.parameters()), lr=cfg.lr, betas=cfg.betas)
    opt_d = torch.optim.Adam(chain(pair.D_X.parameters(), pair.D_Y.parameters()), lr=cfg.lr, betas=cfg.betas)
    rng = random.Random(cfg.seed)
    return TrainState(
        pair=pair,
        opt_g=opt_g,
        opt_d=opt_d,
        buffer_x=ImageHistoryBuffer(cfg.buffer_size, rng),
        buffer_y=ImageHistoryBuffer(cfg.buffer_size, rng),
        rng=rng,
        cfg=cfg,
    )


def save_train_state(state: TrainState, path: str | Path) -> None:
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "kind": "train_state",
        "generator_spec": asdict(state.pair.generator_spec),
        "discriminator_spec": asdict(state.pair.discriminator_spec),
        "state": {name: getattr(state.pair, name).state_dict() for name in ("G", "F", "D_X", "D_Y")},
        "opt_g": state.opt_g.state_dict(),
        "opt_d": state.opt_d.state_dict(),
        "buffer_x": state.buffer_x.images,
        "buffer_y": state.buffer_y.images,
        "rng_state": state.rng.getstate(),
        "epoch": state.epoch,
        "cfg": asdict(state.cfg),
    }
    torch.save(payload, path)


def load_train_state(path: str | Path) -> TrainState:
    if not Path(path).is_file():
        raise ConfigurationError(f"checkpoint {path} does not exist")
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise ConfigurationError(
            f"checkpoint {path} has format version {payload.get('format_version')}, "
            f"expected {CHECKPOINT_FORMAT_VERSION}"
        )
    if payload.get("kind") != "train_state":
        raise ConfigurationError(f"checkpoint {path} does not hold a resumable training state")
    cfg_dict = dict(payload["cfg"])
    cfg_dict["weights"] = LossWeights(**cfg_dict["weights"])
    cfg_dict["betas"] = tuple(cfg_dict["betas"])
    cfg = TrainConfig(**cfg_dict)
    state = init_train_state(cfg, GeneratorSpec(**payload["generator_spec"]), DiscriminatorSpec(**payload["discriminator_spec"]))
    for name in ("G", "F", "D_X", "D_Y"):
        getattr(state.pair, name).load_state_dict(payload["state"][name])
    state.opt_g.load_state_dict(payload["opt_g"])
    state.opt_d.load_state_dict(payload["opt_d"])
    state.buffer_x.images = list(payload["buffer_x"])
    state.buffer_y.images = list(payload["buffer_y"])
    state.rng.setstate(payload["rng_state"])
    state.epoch = int(payload["epoch"])
    return state


def _epoch_order(n_long: int, n_short: int, rng: random.Random) -> tuple[list[int], list[int]]:
    """Independent shuffles; the shorter class is resampled (reshuffled on
    each wrap) until it covers the longer one."""
    long_order = rng.sample(range(n_long), n_long)
    short_order: list[int] = []
    while len(short_order) < n_long:
        short_order.extend(rng.sample(range(n_short), n_short))
    return long_order, short_order[:n_long]


def _squash(scores: torch.Tensor, mode: str) -> torch.Tensor:
    return torch.sigmoid(scores) if mode == MODE_LOG else scores


def _check_finite(breakdown: LossBreakdown, iteration: int) -> None:
    for name in LossBreakdown.FIELDS:
        value = getattr(breakdown, name)
        if not math.isfinite(value):
            raise NumericalError(f"non-finite loss at iteration {iteration}: {name} = {value}")


def train_step(state: TrainState, x: torch.Tensor, y: torch.Tensor) -> LossBreakdown:
    """One alternating update: generators on the full objective, then
    discriminators on buffer-sampled fakes."""
    cfg = state.cfg
    pair = state.pair
    mode = cfg.adversarial_mode

    _set_requires_grad(pair.discriminators(), False)
    state.opt_g.zero_grad(set_to_none=True)
    fake_y = pair.G(x)
    fake_x = pair.F(y)
    rec_x = pair.F(fake_y)
    rec_y = pair.G(fake_x)
    idt_x = pair.F(x)
    idt_y = pair.G(y)
    adv_g = adversarial_loss(None, _squash(pair.D_Y(fake_y), mode), mode, SIDE_GENERATOR)
    adv_f = adversarial_loss(None, _squash(pair.D_X(fake_x), mode), mode, SIDE_GENERATOR)
    cyc = cycle_loss(x, rec_x, y, rec_y)
    ide = identity_loss(x, idt_x, y, idt_y)
    total_g = generator_total(adv_g, adv_f, cyc, ide, cfg.weights)
    total_g.backward()
    state.opt_g.step()
    _set_requires_grad(pair.discriminators(), True)

    state.opt_d.zero_grad(set_to_none=True)
    pool_y = state.buffer_y.push_batch(fake_y.detach())
    pool_x = state.buffer_x.push_batch(fake_x.detach())
    adv_dy = adversarial_loss(_squash(pair.D_Y(y), mode), _squash(pair.D_Y(pool_y), mode), mode, SIDE_DISCRIMINATOR)
    adv_dx = adversarial_loss(_squash(pair.D_X(x), mode), _squash(pair.D_X(pool_x), mode), mode, SIDE_DISCRIMINATOR)
    total_d = adv_dx + adv_dy
    loss_d = -total_d if DISCRIMINATOR_MAXIMIZES[mode] else total_d
    loss_d.backward()
    state.opt_d.step()

    scalars = [float(t.detach()) for t in (adv_g, adv_f, adv_dx, adv_dy, cyc, ide)]
    return total_objective(*scalars, cfg.weights)


def steps_per_epoch(split: SplitPair, batch_size: int) -> int:
    n_long = max(split.train.n_normal, split.train.n_abnormal)
    return math.ceil(n_long / batch_size)


def _open_log(path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    new = not path.exists() or path.stat().st_size == 0
    handle = path.open("a")
    if new:
        handle.write(",".join(LOG_HEADER) + "\n")
    return handle


def train(
    cfg: TrainConfig,
    split: SplitPair,
    gen_spec: GeneratorSpec,
    disc_spec: DiscriminatorSpec,
    ckpt_dir: str | Path | None = None,
    log_path: str | Path | None = None,
    resume_from: str | Path | None = None,
    on_epoch: Callable[[TrainState, int, list], None] | None = None,
) -> TrainResult:
    """Run the schedule over split.train, checkpointing as configured.

    Each step pairs one abnormal and one normal mini-batch; the longer
    class determines the epoch length and the shorter is resampled. A
    non-finite loss aborts immediately rather than training through it.
    """
    x_train = split.train.by_label(ABNORMAL)
    y_train = split.train.by_label(NORMAL)
    if not x_train or not y_train:
        raise ConfigurationError("training split must contain at least one image of each class")

    if cfg.deterministic:
        torch.use_deterministic_algorithms(True)
    torch.manual_seed(cfg.seed)

    if resume_from is not None:
        state = load_train_state(resume_from)
        if asdict(state.cfg) != asdict(cfg):
            raise ConfigurationError("resume checkpoint was written under a different training config")
    else:
        state = init_train_state(cfg, gen_spec, disc_spec)
    for module in state.pair.generators() + state.pair.discriminators():
        module.train()

    x_all = images_to_batch(x_train)
    y_all = images_to_batch(y_train)
    for tensor, spec_res in ((x_all, gen_spec.resolution), (y_all, gen_spec.resolution)):
        if tensor.shape[2] != spec_res or tensor.shape[3] != spec_res:
            raise ConfigurationError(
                f"training images are {tensor.shape[2]}x{tensor.shape[3]} but the generator expects "
                f"{spec_res}x{spec_res}; preprocess the split first"
            )

    ckpt_path = Path(ckpt_dir) if ckpt_dir is not None else None
    if ckpt_path is not None:
        ckpt_path.mkdir(parents=True, exist_ok=True)
    log_handle = _open_log(Path(log_path)) if log_path is not None else None

    swap = len(x_train) < len(y_train)
    n_long = max(len(x_train), len(y_train))
    n_short = min(len(x_train), len(y_train))
    per_epoch = steps_per_epoch(split, cfg.batch_size)

    log_rows: list[tuple] = []
    checkpoint_paths: list[Path] = []
    iteration = state.epoch * per_epoch
    try:
        for epoch in range(state.epoch + 1, cfg.epochs + 1):
            lr = lr_at(epoch, cfg)
            for opt in (state.opt_g, state.opt_d):
                for group in opt.param_groups:
                    group["lr"] = lr
            long_order, short_order = _epoch_order(n_long, n_short, state.rng)
            x_order, y_order = (short_order, long_order) if swap else (long_order, short_order)
            for start in range(0, n_long, cfg.batch_size):
                stop = min(start + cfg.batch_size, n_long)
                x = x_all[x_order[start:stop]]
                y = y_all[y_order[start:stop]]
                breakdown = train_step(state, x, y)
                iteration += 1
                _check_finite(breakdown, iteration)
                row = (iteration, epoch) + breakdown.as_row()
                log_rows.append(row)
                if log_handle is not None:
                    log_handle.write(",".join(repr(v) for v in row) + "\n")
            state.epoch = epoch
            if ckpt_path is not None and (epoch % cfg.checkpoint_every == 0 or epoch == cfg.epochs):
                ckpt = ckpt_path / f"ckpt_epoch_{epoch:04d}.pt"
                save_train_state(state, ckpt)
                checkpoint_paths.append(ckpt)
            if on_epoch is not None:
                on_epoch(state, epoch, log_rows)
    finally:
        if log_handle is not None:
            log_handle.close()

    return TrainResult(state=state, log_rows=log_rows, checkpoint_paths=checkpoint_paths)
