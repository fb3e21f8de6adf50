"""Torch modules realizing the declarative generator/discriminator specs."""

from __future__ import annotations

import torch
import torch.nn as nn

from ..config import CycleGanConfig


def _inorm(channels: int) -> nn.InstanceNorm2d:
    # Learned per-channel scale and offset (2C parameters), eps 1e-5.
    return nn.InstanceNorm2d(channels, affine=True, eps=1e-5)


class ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.block = nn.Sequential(
            nn.ReflectionPad2d(1),
            nn.Conv2d(channels, channels, 3, bias=False),
            _inorm(channels),
            nn.ReLU(inplace=True),
            nn.ReflectionPad2d(1),
            nn.Conv2d(channels, channels, 3, bias=False),
            _inorm(channels),
        )

    def forward(self, x):
        return x + self.block(x)


class ResnetGenerator(nn.Module):
    """7x7 stem, two stride-2 downsamplers, residual trunk, two stride-2 upsamplers, tanh output."""

    def __init__(self, cfg: CycleGanConfig):
        super().__init__()
        bf = cfg.base_filters
        layers: list[nn.Module] = [
            nn.ReflectionPad2d(3),
            nn.Conv2d(1, bf, 7, bias=False),
            _inorm(bf),
            nn.ReLU(inplace=True),
        ]
        for mult in (2, 4):
            layers += [
                nn.Conv2d(bf * mult // 2, bf * mult, 3, stride=2, padding=1, bias=False),
                _inorm(bf * mult),
                nn.ReLU(inplace=True),
            ]
        layers += [ResidualBlock(bf * 4) for _ in range(cfg.residual_blocks)]
        for mult in (2, 1):
            layers += [
                nn.ConvTranspose2d(bf * mult * 2, bf * mult, 3, stride=2, padding=1,
                                   output_padding=1, bias=False),
                _inorm(bf * mult),
                nn.ReLU(inplace=True),
            ]
        layers += [nn.ReflectionPad2d(3), nn.Conv2d(bf, 1, 7, bias=True), nn.Tanh()]
        self.model = nn.Sequential(*layers)

    def forward(self, x):
        return self.model(x)


class PatchDiscriminator(nn.Module):
    """Stride-2 downsampling stack ending in a linear patch map (28x28 at 224 input)."""

    def __init__(self, cfg: CycleGanConfig):
        super().__init__()
        c = cfg.base_filters * 2
        slope = cfg.leaky_slope
        self.model = nn.Sequential(
            nn.Conv2d(1, c, 4, stride=2, padding=1, bias=True),
            nn.LeakyReLU(slope, inplace=True),
            nn.Conv2d(c, c * 2, 4, stride=2, padding=1, bias=False),
            _inorm(c * 2),
            nn.LeakyReLU(slope, inplace=True),
            nn.Conv2d(c * 2, c * 4, 4, stride=2, padding=1, bias=False),
            _inorm(c * 4),
            nn.LeakyReLU(slope, inplace=True),
            # stride-1 "same" with an even kernel pads asymmetrically
            nn.ZeroPad2d((1, 2, 1, 2)),
            nn.Conv2d(c * 4, c * 8, 4, stride=1, bias=False),
            _inorm(c * 8),
            nn.LeakyReLU(slope, inplace=True),
            nn.ZeroPad2d((1, 2, 1, 2)),
            nn.Conv2d(c * 8, 1, 4, stride=1, bias=True),
        )

    def forward(self, x):
        return self.model(x)


def init_weights(module: nn.Module, gain: float = 0.02, seed: int | None = None) -> None:
    """Gaussian(0, 0.02) conv init, unit scale / zero offset for instance norm."""
    gen = torch.Generator()
    if seed is not None:
        gen.manual_seed(seed)
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
            with torch.no_grad():
                m.weight.normal_(0.0, gain, generator=gen)
                if m.bias is not None:
                    m.bias.zero_()
        elif isinstance(m, nn.InstanceNorm2d) and m.affine:
            with torch.no_grad():
                m.weight.fill_(1.0)
                m.bias.zero_()


def count_params(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


def layer_param_counts(module: nn.Module) -> list[tuple[str, int]]:
    """(kind, parameter count) for every leaf module holding parameters, in forward order."""
    kinds = {
        nn.Conv2d: "conv",
        nn.ConvTranspose2d: "conv_transpose",
        nn.InstanceNorm2d: "instance_norm",
    }
    rows = []
    for m in module.modules():
        for cls, kind in kinds.items():
            if type(m) is cls:
                n = sum(p.numel() for p in m.parameters(recurse=False))
                if n:
                    rows.append((kind, n))
    return rows
