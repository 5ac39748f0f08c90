"""Loss algebra for both cycles.

Every squared-norm expression is realized as a per-element mean, so loss
magnitudes are independent of patch size and the published weight scales
apply unchanged. The LR-cycle identity term is the single L1 loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch


class LossError(ValueError):
    pass


@dataclass(frozen=True)
class LossWeights:
    w1: float = 10.0
    w2: float = 5.0
    w3: float = 0.5
    lambda1: float = 10.0
    lambda2: float = 5.0
    lambda3: float = 2.0

    def __post_init__(self):
        for name in ("w1", "w2", "w3", "lambda1", "lambda2", "lambda3"):
            if getattr(self, name) < 0:
                raise LossError(f"{name} must be >= 0")


@dataclass
class LossBreakdown:
    gan: float
    cyc: float
    idt: float
    tv: float
    total: float
    side: str  # "LR-cycle" or "HR-cycle"

    def as_dict(self) -> dict:
        return {
            "side": self.side,
            "gan": self.gan,
            "cyc": self.cyc,
            "idt": self.idt,
            "tv": self.tv,
            "total": self.total,
        }


def _check_nonempty(t: torch.Tensor, name: str) -> None:
    if t.numel() == 0:
        raise LossError(f"{name} is empty")


def _check_same_shape(a: torch.Tensor, b: torch.Tensor) -> None:
    if a.shape != b.shape:
        raise LossError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")


def lsgan_g_loss(d_out: torch.Tensor) -> torch.Tensor:
    """Generator-side least-squares loss: mean (D(fake) - 1)^2."""
    _check_nonempty(d_out, "d_out")
    return ((d_out - 1.0) ** 2).mean()


def lsgan_d_loss(d_real: torch.Tensor, d_fake: torch.Tensor) -> torch.Tensor:
    """Discriminator-side least-squares loss with the conventional 1/2 factor."""
    _check_nonempty(d_real, "d_real")
    _check_nonempty(d_fake, "d_fake")
    return 0.5 * (((d_real - 1.0) ** 2).mean() + (d_fake**2).mean())


def cycle_loss(reconstructed: torch.Tensor, original: torch.Tensor) -> torch.Tensor:
    _check_same_shape(reconstructed, original)
    _check_nonempty(original, "original")
    return ((reconstructed - original) ** 2).mean()


def identity_loss_lr(g1_of_y: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    _check_same_shape(g1_of_y, y)
    _check_nonempty(y, "y")
    return (g1_of_y - y).abs().mean()


def identity_loss_hr(sr_of_zprime: torch.Tensor, z: torch.Tensor) -> torch.Tensor:
    # batch-mean reduction applied for consistency with every other loss
    _check_same_shape(sr_of_zprime, z)
    _check_nonempty(z, "z")
    return ((sr_of_zprime - z) ** 2).mean()


def tv_loss(img_batch: torch.Tensor) -> torch.Tensor:
    """Mean squared forward differences along height and width."""
    if img_batch.dim() != 4:
        raise LossError(f"expected (N, C, H, W), got {tuple(img_batch.shape)}")
    if img_batch.shape[2] < 2 or img_batch.shape[3] < 2:
        raise LossError("tv_loss needs spatial dims >= 2")
    dh = img_batch[:, :, 1:, :] - img_batch[:, :, :-1, :]
    dw = img_batch[:, :, :, 1:] - img_batch[:, :, :, :-1]
    return (dh**2).mean() + (dw**2).mean()


def _combine(gan, cyc, idt, tv, weights: tuple[float, float, float], side: str):
    a, b, c = weights
    if a < 0 or b < 0 or c < 0:
        raise LossError("loss weights must be >= 0")
    total = gan + a * cyc + b * idt + c * tv

    def _f(t):
        return float(t.detach()) if isinstance(t, torch.Tensor) else float(t)

    breakdown = LossBreakdown(
        gan=_f(gan), cyc=_f(cyc), idt=_f(idt), tv=_f(tv), total=_f(total), side=side,
    )
    return total, breakdown


def total_loss_lr(
    gan: torch.Tensor,
    cyc: torch.Tensor,
    idt: torch.Tensor,
    tv: torch.Tensor,
    weights: LossWeights,
    w2_override: float | None = None,
) -> tuple[torch.Tensor, LossBreakdown]:
    """Weighted LR-cycle objective; w2 drops to its joint-phase value via override."""
    w2 = weights.w2 if w2_override is None else w2_override
    return _combine(gan, cyc, idt, tv, (weights.w1, w2, weights.w3), "LR-cycle")


def total_loss_hr(
    gan: torch.Tensor,
    cyc: torch.Tensor,
    idt: torch.Tensor,
    tv: torch.Tensor,
    weights: LossWeights,
) -> tuple[torch.Tensor, LossBreakdown]:
    return _combine(
        gan, cyc, idt, tv, (weights.lambda1, weights.lambda2, weights.lambda3), "HR-cycle"
    )
