"""Adversarial, cycle-consistency, and identity losses, and their
composition into the full training objective.

All reductions are means over batch and patch units so the loss weights
keep the same scale at any resolution. The least-squares adversarial form
is the training default; the log form is kept for formula-level checks and
returns, on the discriminator side, the quantity that the discriminator
maximizes.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import isfinite

import torch

from .errors import ConfigurationError, ShapeError

MODE_LOG = "log"
MODE_LEAST_SQUARES = "least-squares"
ADVERSARIAL_MODES = (MODE_LOG, MODE_LEAST_SQUARES)

SIDE_GENERATOR = "generator"
SIDE_DISCRIMINATOR = "discriminator"

# Whether the discriminator-side value is maximized (log) or minimized
# (least-squares) during training.
DISCRIMINATOR_MAXIMIZES = {MODE_LOG: True, MODE_LEAST_SQUARES: False}

LOG_EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    """Weights of the cycle and identity terms in the total objective."""

    lambda_cyc: float = 10.0
    lambda_ide: float = 5.0

    def __post_init__(self) -> None:
        for name, value in (("lambda_cyc", self.lambda_cyc), ("lambda_ide", self.lambda_ide)):
            if not isfinite(value) or value < 0:
                raise ConfigurationError(f"{name} must be finite and non-negative, got {value}")


@dataclass(frozen=True)
class LossBreakdown:
    """Per-step scalar losses; totals are exact compositions of the parts."""

    adv_G: float
    adv_F: float
    adv_DX: float
    adv_DY: float
    cyc: float
    ide: float
    total_generator: float
    total_discriminator: float

    FIELDS = ("adv_G", "adv_F", "adv_DX", "adv_DY", "cyc", "ide", "total_generator", "total_discriminator")

    def as_row(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in self.FIELDS)


def _as_tensor(value) -> torch.Tensor:
    return value if isinstance(value, torch.Tensor) else torch.as_tensor(value, dtype=torch.float64)


def _clamped_log(p: torch.Tensor) -> torch.Tensor:
    return torch.log(p.clamp(min=LOG_EPS, max=1.0 - LOG_EPS))


def adversarial_loss(real_scores, fake_scores, mode: str = MODE_LEAST_SQUARES, side: str = SIDE_GENERATOR):
    """Adversarial term over patch score maps, averaged over all units.

    least-squares: targets 1 for real and 0 for fake; both sides return a
    loss to minimize, the discriminator side carrying the usual 1/2 factor.
    log: scores must already be probabilities in (0, 1). The generator side
    is the non-saturating loss -E[log D(fake)]; the discriminator side is
    E[log D(real)] + E[log(1 - D(fake))], i.e. the maximized objective.
    Probabilities are epsilon-clamped so the log never produces NaN/Inf.
    """
    if mode not in ADVERSARIAL_MODES:
        raise ConfigurationError(f"mode must be one of {ADVERSARIAL_MODES}, got {mode!r}")
    if side not in (SIDE_GENERATOR, SIDE_DISCRIMINATOR):
        raise ConfigurationError(f"side must be generator or discriminator, got {side!r}")
    fake = _as_tensor(fake_scores)

    if side == SIDE_GENERATOR:
        if mode == MODE_LEAST_SQUARES:
            return ((fake - 1.0) ** 2).mean()
        return -_clamped_log(fake).mean()

    if real_scores is None:
        raise ConfigurationError("discriminator side needs real scores")
    real = _as_tensor(real_scores)
    if real.shape != fake.shape:
        raise ShapeError(f"real and fake score maps differ in shape: {tuple(real.shape)} vs {tuple(fake.shape)}")
    if mode == MODE_LEAST_SQUARES:
        return 0.5 * ((real - 1.0) ** 2).mean() + 0.5 * (fake**2).mean()
    return _clamped_log(real).mean() + _clamped_log(1.0 - fake).mean()


def _mean_l1(a: torch.Tensor, b: torch.Tensor, what: str) -> torch.Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"{what}: shapes differ, {tuple(a.shape)} vs {tuple(b.shape)}")
    return (a - b).abs().mean()


def cycle_loss(x, f_of_g_x, y, g_of_f_y):
    """Mean absolute error of both reconstruction cycles, summed."""
    x, fgx = _as_tensor(x), _as_tensor(f_of_g_x)
    y, gfy = _as_tensor(y), _as_tensor(g_of_f_y)
    return _mean_l1(fgx, x, "cycle x") + _mean_l1(gfy, y, "cycle y")


def identity_loss(x, f_of_x, y, g_of_y):
    """Penalty for modifying images already in a generator's output domain."""
    x, fx = _as_tensor(x), _as_tensor(f_of_x)
    y, gy = _as_tensor(y), _as_tensor(g_of_y)
    return _mean_l1(fx, x, "identity x") + _mean_l1(gy, y, "identity y")


def generator_total(adv_g, adv_f, cyc, ide, weights: LossWeights):
    """adv + lambda_cyc * cyc + lambda_ide * ide, on floats or tensors."""
    return adv_g + adv_f + weights.lambda_cyc * cyc + weights.lambda_ide * ide


def total_objective(
    adv_g: float,
    adv_f: float,
    adv_dx: float,
    adv_dy: float,
    cyc: float,
    ide: float,
    weights: LossWeights,
) -> LossBreakdown:
    """Compose scalar loss components into a LossBreakdown.

    total_generator = adv_G + adv_F + lambda_cyc * cyc + lambda_ide * ide
    holds exactly (same floating-point expression); total_discriminator is
    the sum of the two discriminator terms.
    """
    parts = dict(adv_g=adv_g, adv_f=adv_f, adv_dx=adv_dx, adv_dy=adv_dy, cyc=cyc, ide=ide)
    parts = {k: float(v) for k, v in parts.items()}
    return LossBreakdown(
        adv_G=parts["adv_g"],
        adv_F=parts["adv_f"],
        adv_DX=parts["adv_dx"],
        adv_DY=parts["adv_dy"],
        cyc=parts["cyc"],
        ide=parts["ide"],
        total_generator=generator_total(parts["adv_g"], parts["adv_f"], parts["cyc"], parts["ide"], weights),
        total_discriminator=parts["adv_dx"] + parts["adv_dy"],
    )
