"""Generator and discriminator architectures, introspection, checkpoints.

Two residual generators map either domain into one target domain each; two
patch discriminators judge realism on overlapping receptive fields. Layer
choices (reflection padding, instance norm, normal(0, 0.02) init) follow
the standard cycle-consistent translation setup.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import torch
from torch import nn

from .errors import ConfigurationError, ShapeError, SpecError

CHECKPOINT_FORMAT_VERSION = 1

UPSAMPLE_MODES = ("transpose", "resize")


@dataclass(frozen=True)
class GeneratorSpec:
    """Hyperparameters of one residual translation generator."""

    resolution: int
    in_channels: int = 3
    out_channels: int = 3
    base_width: int = 64
    n_residual_blocks: int | None = None  # default: 9 at >=256, else 6
    normalization: str = "instance"
    upsample: str = "transpose"  # transpose convs, or resize+conv to avoid checkerboard artifacts

    def __post_init__(self) -> None:
        if self.resolution % 4 != 0 or self.resolution <= 0:
            raise SpecError(f"resolution must be a positive multiple of 4, got {self.resolution}")
        if self.n_residual_blocks is None:
            object.__setattr__(self, "n_residual_blocks", 9 if self.resolution >= 256 else 6)
        if self.n_residual_blocks < 1:
            raise SpecError(f"need at least 1 residual block, got {self.n_residual_blocks}")
        if self.in_channels not in (1, 3) or self.out_channels not in (1, 3):
            raise SpecError("in_channels and out_channels must be 1 or 3")
        if self.base_width < 1:
            raise SpecError(f"base_width must be positive, got {self.base_width}")
        if self.normalization != "instance":
            raise SpecError(f"only instance normalization is supported, got {self.normalization!r}")
        if self.upsample not in UPSAMPLE_MODES:
            raise SpecError(f"upsample must be one of {UPSAMPLE_MODES}, got {self.upsample!r}")


@dataclass(frozen=True)
class DiscriminatorSpec:
    """Hyperparameters of one patch discriminator.

    The layer pattern is fixed: 4x4 convs, stride 2 through the width list
    except the last entry, then a stride-1 layer and a stride-1 map to one
    output channel. The default widths give a 70x70 receptive field.
    """

    in_channels: int = 3
    widths: tuple[int, ...] = (64, 128, 256, 512)
    normalization: str = "instance"  # never applied to the first layer

    def __post_init__(self) -> None:
        if self.in_channels not in (1, 3):
            raise SpecError("in_channels must be 1 or 3")
        if len(self.widths) < 2:
            raise SpecError("widths needs at least two entries")
        if any(b <= a for a, b in zip(self.widths, self.widths[1:])):
            raise SpecError(f"widths must be strictly increasing, got {self.widths}")
        if self.normalization != "instance":
            raise SpecError(f"only instance normalization is supported, got {self.normalization!r}")

    def layers(self) -> list[tuple[int, int, int]]:
        """(kernel, stride, out_width) per conv, output layer included."""
        out = [(4, 2, w) for w in self.widths[:-1]]
        out.append((4, 1, self.widths[-1]))
        out.append((4, 1, 1))
        return out


def receptive_field_of_layers(layers: list[tuple[int, int]]) -> int:
    """Receptive field of one output unit for a (kernel, stride) conv stack.

    Standard recurrence: r grows by (k - 1) times the product of all
    earlier strides.
    """
    r, jump = 1, 1
    for kernel, stride in layers:
        r += (kernel - 1) * jump
        jump *= stride
    return r


def receptive_field(spec: DiscriminatorSpec) -> int:
    return receptive_field_of_layers([(k, s) for k, s, _ in spec.layers()])


class ResidualBlock(nn.Module):
    """Two reflection-padded 3x3 convs with instance norm; identity skip."""

    def __init__(self, width: int):
        super().__init__()
        self.block = nn.Sequential(
            nn.Conv2d(width, width, 3, padding=1, padding_mode="reflect"),
            nn.InstanceNorm2d(width),
            nn.ReLU(inplace=True),
            nn.Conv2d(width, width, 3, padding=1, padding_mode="reflect"),
            nn.InstanceNorm2d(width),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.block(x)


class ResnetGenerator(nn.Module):
    """7x7 stem, two stride-2 encoders, residual trunk, two upsampling
    stages, 7x7 head with tanh output in [-1, 1]."""

    def __init__(self, spec: GeneratorSpec):
        super().__init__()
        self.spec = spec
        w = spec.base_width
        layers: list[nn.Module] = [
            nn.Conv2d(spec.in_channels, w, 7, padding=3, padding_mode="reflect"),
            nn.InstanceNorm2d(w),
            nn.ReLU(inplace=True),
        ]
        for _ in range(2):
            layers += [
                nn.Conv2d(w, 2 * w, 3, stride=2, padding=1),
                nn.InstanceNorm2d(2 * w),
                nn.ReLU(inplace=True),
            ]
            w *= 2
        layers += [ResidualBlock(w) for _ in range(spec.n_residual_blocks)]
        for _ in range(2):
            if spec.upsample == "transpose":
                up: nn.Module = nn.ConvTranspose2d(w, w // 2, 3, stride=2, padding=1, output_padding=1)
                layers += [up]
            else:
                layers += [
                    nn.Upsample(scale_factor=2, mode="nearest"),
                    nn.Conv2d(w, w // 2, 3, padding=1),
                ]
            layers += [nn.InstanceNorm2d(w // 2), nn.ReLU(inplace=True)]
            w //= 2
        layers += [
            nn.Conv2d(w, spec.out_channels, 7, padding=3, padding_mode="reflect"),
            nn.Tanh(),
        ]
        self.layers = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.layers(x)


class PatchDiscriminator(nn.Module):
    """4x4 conv stack emitting a spatial map of raw realism scores.

    Leaky slope 0.2 throughout; instance norm on every layer except the
    first and the output.
    """

    def __init__(self, spec: DiscriminatorSpec):
        super().__init__()
        self.spec = spec
        layers: list[nn.Module] = []
        in_ch = spec.in_channels
        stack = spec.layers()
        for i, (kernel, stride, width) in enumerate(stack):
            layers.append(nn.Conv2d(in_ch, width, kernel, stride=stride, padding=1))
            is_output = i == len(stack) - 1
            if not is_output:
                if i > 0:
                    layers.append(nn.InstanceNorm2d(width))
                layers.append(nn.LeakyReLU(0.2, inplace=True))
            in_ch = width
        self.layers = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.layers(x)


def _init_weights(module: nn.Module, seed: int) -> None:
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for m in module.modules():
            if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
                m.weight.normal_(0.0, 0.02, generator=gen)
                if m.bias is not None:
                    m.bias.zero_()


def build_generator(spec: GeneratorSpec, init_seed: int = 0) -> ResnetGenerator:
    """Construct a generator with deterministic normal(0, 0.02) init."""
    model = ResnetGenerator(spec)
    _init_weights(model, init_seed)
    return model


def build_discriminator(spec: DiscriminatorSpec, init_seed: int = 0) -> PatchDiscriminator:
    model = PatchDiscriminator(spec)
    _init_weights(model, init_seed)
    return model


def generator_forward(generator: ResnetGenerator, batch: torch.Tensor) -> torch.Tensor:
    """Forward a batch of images in [-1, 1]; validates spatial size."""
    spec = generator.spec
    if batch.ndim != 4:
        raise ShapeError(f"expected a 4-d batch (N, C, H, W), got {tuple(batch.shape)}")
    if batch.shape[1] != spec.in_channels:
        raise ShapeError(f"expected {spec.in_channels} channels, got {batch.shape[1]}")
    if batch.shape[2] != spec.resolution or batch.shape[3] != spec.resolution:
        raise ShapeError(
            f"expected {spec.resolution}x{spec.resolution} input, got {batch.shape[2]}x{batch.shape[3]}"
        )
    return generator(batch)


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


@dataclass(eq=False)
class ModelPair:
    """The two generators and two discriminators trained jointly.

    G maps anything toward the normal domain, F toward the abnormal one;
    D_Y judges normal-looking images, D_X abnormal-looking ones. G and F
    share a spec, as do D_X and D_Y.
    """

    G: ResnetGenerator
    F: ResnetGenerator
    D_X: PatchDiscriminator
    D_Y: PatchDiscriminator
    generator_spec: GeneratorSpec = field(init=False)
    discriminator_spec: DiscriminatorSpec = field(init=False)

    def __post_init__(self) -> None:
        if self.G.spec != self.F.spec:
            raise SpecError("G and F must share a generator spec")
        if self.D_X.spec != self.D_Y.spec:
            raise SpecError("D_X and D_Y must share a discriminator spec")
        self.generator_spec = self.G.spec
        self.discriminator_spec = self.D_X.spec

    def generators(self) -> list[nn.Module]:
        return [self.G, self.F]

    def discriminators(self) -> list[nn.Module]:
        return [self.D_X, self.D_Y]


def build_model_pair(gen_spec: GeneratorSpec, disc_spec: DiscriminatorSpec, seed: int = 0) -> ModelPair:
    """Build all four networks with distinct seeds derived from one seed."""
    return ModelPair(
        G=build_generator(gen_spec, seed),
        F=build_generator(gen_spec, seed + 1),
        D_X=build_discriminator(disc_spec, seed + 2),
        D_Y=build_discriminator(disc_spec, seed + 3),
    )


def save_model_pair(pair: ModelPair, path: str | Path, extra: dict | None = None) -> None:
    """Self-describing checkpoint: specs, parameters, format version."""
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "generator_spec": asdict(pair.generator_spec),
        "discriminator_spec": asdict(pair.discriminator_spec),
        "state": {
            "G": pair.G.state_dict(),
            "F": pair.F.state_dict(),
            "D_X": pair.D_X.state_dict(),
            "D_Y": pair.D_Y.state_dict(),
        },
    }
    if extra:
        payload["extra"] = extra
    torch.save(payload, path)


def _check_format(payload: dict, path: str | Path) -> None:
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ConfigurationError(
            f"checkpoint {path} has format version {version}, expected {CHECKPOINT_FORMAT_VERSION}"
        )


def load_model_pair(path: str | Path) -> tuple[ModelPair, dict]:
    """Rebuild a ModelPair from a checkpoint; round-trip is bit-exact."""
    if not Path(path).is_file():
        raise ConfigurationError(f"checkpoint {path} does not exist")
    payload = torch.load(path, map_location="cpu", weights_only=False)
    _check_format(payload, path)
    gen_spec = GeneratorSpec(**payload["generator_spec"])
    disc_spec = DiscriminatorSpec(**payload["discriminator_spec"])
    pair = build_model_pair(gen_spec, disc_spec, seed=0)
    for name, module in (("G", pair.G), ("F", pair.F), ("D_X", pair.D_X), ("D_Y", pair.D_Y)):
        module.load_state_dict(payload["state"][name])
    return pair, payload.get("extra", {})


def checkpoint_hash(path: str | Path) -> str:
    """First 12 hex chars of the checkpoint file's SHA-256."""
    digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()
    return digest[:12]
