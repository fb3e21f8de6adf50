"""Least-squares adversarial loss, cycle-consistency and identity terms."""

from __future__ import annotations

from dataclasses import dataclass

import torch

from ..errors import NumericsError


def _require_finite(value: torch.Tensor, term: str) -> torch.Tensor:
    if not torch.isfinite(value).all():
        raise NumericsError(f"non-finite value in loss term {term!r}")
    return value


def _require_same_shape(a: torch.Tensor, b: torch.Tensor, term: str) -> None:
    if a.shape != b.shape:
        raise NumericsError(f"shape mismatch in {term}: {tuple(a.shape)} vs {tuple(b.shape)}")


def adversarial_loss(
    d_out_real: torch.Tensor | None, d_out_fake: torch.Tensor, role: str
) -> torch.Tensor:
    """Least-squares patch objective.

    Discriminator: mean((D(real) - 1)^2) + mean(D(fake)^2).
    Generator: mean((D(fake) - 1)^2). Means run over all patch entries and
    the batch.
    """
    _require_finite(d_out_fake, "adversarial_fake")
    if role == "generator":
        return ((d_out_fake - 1.0) ** 2).mean()
    if role == "discriminator":
        if d_out_real is None:
            raise ValueError("discriminator loss needs real-sample outputs")
        _require_finite(d_out_real, "adversarial_real")
        return ((d_out_real - 1.0) ** 2).mean() + (d_out_fake**2).mean()
    raise ValueError(f"role must be 'generator' or 'discriminator', got {role!r}")


def cycle_loss(
    x: torch.Tensor, x_rec: torch.Tensor, y: torch.Tensor, y_rec: torch.Tensor
) -> torch.Tensor:
    """L1 round-trip penalty over both domains."""
    _require_same_shape(x, x_rec, "cycle_x")
    _require_same_shape(y, y_rec, "cycle_y")
    return (x_rec - x).abs().mean() + (y_rec - y).abs().mean()


def identity_loss(g_of_y: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    """L1 penalty on a generator fed its own target domain."""
    _require_same_shape(g_of_y, y, "identity")
    return (g_of_y - y).abs().mean()


@dataclass
class GeneratorLossParts:
    adv_g: torch.Tensor
    adv_f: torch.Tensor
    cycle: torch.Tensor
    identity_g: torch.Tensor
    identity_f: torch.Tensor


def total_generator_loss(
    parts: GeneratorLossParts, lambda_cyc: float, identity_weight: float
) -> torch.Tensor:
    """adv(G) + adv(F) + lambda_cyc * cycle + identity_weight * (id_G + id_F).

    With the default weighting the identity factor is lambda_identity *
    lambda_cyc (0.5 * 10 = 5).
    """
    total = (
        parts.adv_g
        + parts.adv_f
        + lambda_cyc * parts.cycle
        + identity_weight * (parts.identity_g + parts.identity_f)
    )
    return _require_finite(total, "total_generator")
