import numpy as np
import pytest

from cyclead import DiscriminatorSpec, GeneratorSpec, LabeledImage, LabeledImageSet

# Tiny architecture used wherever a test only needs a working model pair.
TINY_RESOLUTION = 16


def make_tiny_gen_spec() -> GeneratorSpec:
    return GeneratorSpec(
        resolution=TINY_RESOLUTION,
        in_channels=1,
        out_channels=1,
        base_width=4,
        n_residual_blocks=1,
    )


def make_tiny_disc_spec() -> DiscriminatorSpec:
    return DiscriminatorSpec(in_channels=1, widths=(4, 8))


@pytest.fixture
def tiny_gen_spec():
    return make_tiny_gen_spec()


@pytest.fixture
def tiny_disc_spec():
    return make_tiny_disc_spec()


def make_image(value: float, label: str, source_id: str, resolution: int = TINY_RESOLUTION, channels: int = 1):
    return LabeledImage(
        np.full((resolution, resolution, channels), value, dtype=np.float32), label, source_id
    )


def make_set(n_normal: int, n_abnormal: int, resolution: int = TINY_RESOLUTION, channels: int = 1):
    rng = np.random.default_rng(0)
    images = []
    for i in range(n_normal):
        images.append(
            LabeledImage(
                rng.uniform(0.0, 1.0, (resolution, resolution, channels)).astype(np.float32),
                "normal",
                f"n{i}",
            )
        )
    for i in range(n_abnormal):
        images.append(
            LabeledImage(
                rng.uniform(0.0, 1.0, (resolution, resolution, channels)).astype(np.float32),
                "abnormal",
                f"a{i}",
            )
        )
    return LabeledImageSet(images, name="fixture")


# ---------------------------------------------------------------------------
# Finite-difference gradient checking on a miniature model pair.

def build_mini_pair_double(seed: int = 0):
    """8x8 single-channel pair in float64, small enough for FD probing."""
    import torch
    from cyclead.models import build_model_pair

    gen_spec = GeneratorSpec(
        resolution=8, in_channels=1, out_channels=1, base_width=4, n_residual_blocks=1
    )
    disc_spec = DiscriminatorSpec(in_channels=1, widths=(8, 16))
    pair = build_model_pair(gen_spec, disc_spec, seed=seed)
    for module in (pair.G, pair.F, pair.D_X, pair.D_Y):
        module.double()
    return pair


def finite_difference_gradient_check(n_samples: int, seed: int = 0, h: float = 1e-5):
    """Compare autograd against central differences on generator parameters.

    Returns a list of (analytic, numeric) gradient pairs for n_samples
    randomly chosen parameter coordinates of G and F, under the full
    generator objective (adversarial + cycle + identity, least-squares).

    The check runs at a generic parameter point: seeded N(0, 0.3) noise is
    added to the freshly initialized weights. At the raw 0.02-scale init
    the instance-norm statistics over tiny spatial maps make the objective
    so sharply curved that central differences at this step size carry
    visible truncation error; larger weights give larger feature variance
    and a numerically tame neighborhood.
    """
    import random

    import torch
    from cyclead.losses import (
        LossWeights,
        SIDE_GENERATOR,
        adversarial_loss,
        cycle_loss,
        generator_total,
        identity_loss,
    )

    pair = build_mini_pair_double(seed=seed)
    noise_rng = torch.Generator().manual_seed(seed + 123)
    with torch.no_grad():
        for module in (pair.G, pair.F, pair.D_X, pair.D_Y):
            for p in module.parameters():
                p.add_(torch.randn(p.shape, generator=noise_rng, dtype=torch.float64) * 0.3)
    weights = LossWeights()
    rng = torch.Generator().manual_seed(seed)
    x = (torch.rand(2, 1, 8, 8, generator=rng, dtype=torch.float64) * 2 - 1)
    y = (torch.rand(2, 1, 8, 8, generator=rng, dtype=torch.float64) * 2 - 1)

    def objective() -> "torch.Tensor":
        fake_y = pair.G(x)
        fake_x = pair.F(y)
        adv_g = adversarial_loss(None, pair.D_Y(fake_y), side=SIDE_GENERATOR)
        adv_f = adversarial_loss(None, pair.D_X(fake_x), side=SIDE_GENERATOR)
        cyc = cycle_loss(x, pair.F(fake_y), y, pair.G(fake_x))
        ide = identity_loss(x, pair.F(x), y, pair.G(y))
        return generator_total(adv_g, adv_f, cyc, ide, weights)

    params = [p for module in (pair.G, pair.F) for p in module.parameters()]
    for p in params:
        p.grad = None
    objective().backward()

    coord_rng = random.Random(seed)
    flat_choices = [(i, j) for i, p in enumerate(params) for j in range(0, p.numel())]
    picks = coord_rng.sample(flat_choices, k=min(n_samples, len(flat_choices)))

    pairs = []
    with torch.no_grad():
        for i, j in picks:
            p = params[i]
            analytic = float(p.grad.flatten()[j])
            flat = p.data.flatten()
            orig = float(flat[j])
            flat[j] = orig + h
            f_plus = float(objective())
            flat[j] = orig - h
            f_minus = float(objective())
            flat[j] = orig
            pairs.append((analytic, (f_plus - f_minus) / (2 * h)))
    return pairs


def assert_gradients_match(pairs, rel_tol: float = 1e-3, abs_tol: float = 1e-6):
    for analytic, numeric in pairs:
        if abs(analytic) < 1e-6:
            assert abs(analytic - numeric) <= abs_tol, (analytic, numeric)
        else:
            rel = abs(analytic - numeric) / abs(analytic)
            assert rel <= rel_tol, (analytic, numeric, rel)


# ---------------------------------------------------------------------------
# Random score sets and independent threshold/AUC oracles.

def make_random_score_sets(n_sets: int, seed: int = 0):
    """Score-set fixtures of varied size, with ties injected.

    Returns a list of (normal_scores, abnormal_scores) tuples whose sizes
    span 2..200, mixing continuous draws with coarse grids so exact ties
    occur both within and across classes.
    """
    rng = np.random.default_rng(seed)
    sets = []
    for k in range(n_sets):
        n_no = int(rng.integers(1, 101))
        n_ab = int(rng.integers(1, 101))
        if k % 3 == 0:
            normal = (rng.integers(0, 8, n_no) / 2.0).tolist()
            abnormal = (rng.integers(2, 10, n_ab) / 2.0).tolist()
        elif k % 3 == 1:
            normal = rng.normal(0.0, 1.0, n_no).tolist()
            abnormal = rng.normal(1.0, 1.0, n_ab).tolist()
        else:
            normal = np.round(rng.uniform(0, 5, n_no), 1).tolist()
            abnormal = np.round(rng.uniform(1, 6, n_ab), 1).tolist()
        sets.append((normal, abnormal))
    return sets


def brute_force_max_accuracy(normal, abnormal) -> float:
    """Exhaustive maximum accuracy over {-inf} and every observed score."""
    best = -1.0
    total = len(normal) + len(abnormal)
    for tau in [float("-inf"), *normal, *abnormal]:
        correct = sum(1 for s in normal if s < tau) + sum(1 for s in abnormal if s >= tau)
        best = max(best, correct / total)
    return best


def auc_pairwise_oracle(normal, abnormal) -> float:
    """Mann-Whitney by direct enumeration of all pairs, ties half-counted."""
    wins = 0.0
    for a in abnormal:
        for n in normal:
            if a > n:
                wins += 1.0
            elif a == n:
                wins += 0.5
    return wins / (len(abnormal) * len(normal))
