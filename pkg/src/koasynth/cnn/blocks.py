"""Compound scaling and the MBConv / Fused-MBConv building blocks."""

from __future__ import annotations

import math

import torch
import torch.nn as nn

from ..config import BlockSpec, ScalingConfig, StageGroup


def round_channels(value: float, multiple: int = 8) -> int:
    """Nearest channel multiple (ties round up), never below one multiple."""
    return max(multiple, int(value / multiple + 0.5) * multiple)


def compound_scale(cfg: ScalingConfig) -> tuple[int, int, int]:
    """Scale (depth, width, resolution) by (alpha, beta, gamma)^phi.

    Depth rounds up, width to the nearest channel multiple of 8, resolution to
    the nearest integer. phi = 0 returns the base triple exactly (base widths
    are multiples of 8).
    """
    depth = math.ceil(cfg.alpha**cfg.phi * cfg.base_depth)
    width = round_channels(cfg.beta**cfg.phi * cfg.base_width)
    resolution = int(cfg.gamma**cfg.phi * cfg.base_resolution + 0.5)
    return depth, width, resolution


def scale_stage_plan(
    plan: tuple[StageGroup, ...], scaling: ScalingConfig
) -> tuple[tuple[StageGroup, ...], int]:
    """Apply compound scaling to a stage plan; returns (scaled plan, input resolution)."""
    depth_mult = scaling.alpha**scaling.phi
    width_mult = scaling.beta**scaling.phi
    resolution = int(scaling.gamma**scaling.phi * scaling.base_resolution + 0.5)
    scaled = []
    for group in plan:
        blk = group.block
        scaled.append(
            StageGroup(
                BlockSpec(
                    blk.kind,
                    blk.expansion,
                    round_channels(blk.in_channels * width_mult),
                    round_channels(blk.out_channels * width_mult),
                    blk.stride,
                    blk.se_ratio,
                    blk.kernel,
                ),
                repeat=math.ceil(group.repeat * depth_mult),
            )
        )
    return tuple(scaled), resolution


def _bn(channels: int) -> nn.BatchNorm2d:
    return nn.BatchNorm2d(channels)


class SqueezeExcite(nn.Module):
    """Channel gate: global average pool -> bottleneck (ReLU) -> expand (sigmoid) -> scale."""

    def __init__(self, channels: int, se_channels: int):
        super().__init__()
        self.reduce = nn.Conv2d(channels, se_channels, 1)
        self.expand = nn.Conv2d(se_channels, channels, 1)

    def forward(self, x):
        gate = x.mean(dim=(2, 3), keepdim=True)
        gate = torch.relu(self.reduce(gate))
        gate = torch.sigmoid(self.expand(gate))
        return x * gate


class MBConv(nn.Module):
    """Inverted bottleneck: 1x1 expand -> depthwise 3x3 -> SE -> 1x1 project.

    Activations follow every convolution except the projection; the additive
    skip applies when stride is 1 and channel counts match.
    """

    def __init__(self, spec: BlockSpec):
        super().__init__()
        if spec.kind != "mbconv":
            raise ValueError(f"expected an mbconv spec, got {spec.kind!r}")
        self.spec = spec
        mid = spec.in_channels * spec.expansion
        act = nn.SiLU(inplace=True)
        ops: list[nn.Module] = []
        if spec.expansion != 1:
            ops += [nn.Conv2d(spec.in_channels, mid, 1, bias=False), _bn(mid), act]
        ops += [
            nn.Conv2d(mid, mid, spec.kernel, stride=spec.stride,
                      padding=spec.kernel // 2, groups=mid, bias=False),
            _bn(mid),
            act,
        ]
        if spec.se_ratio > 0:
            ops.append(SqueezeExcite(mid, max(1, int(spec.in_channels * spec.se_ratio))))
        ops += [nn.Conv2d(mid, spec.out_channels, 1, bias=False), _bn(spec.out_channels)]
        self.block = nn.Sequential(*ops)

    def forward(self, x):
        out = self.block(x)
        return x + out if self.spec.has_skip else out


class FusedMBConv(nn.Module):
    """Fused variant: a single 3x3 convolution replaces expand + depthwise, then SE and 1x1 project."""

    def __init__(self, spec: BlockSpec):
        super().__init__()
        if spec.kind != "fused":
            raise ValueError(f"expected a fused spec, got {spec.kind!r}")
        self.spec = spec
        mid = spec.in_channels * spec.expansion
        act = nn.SiLU(inplace=True)
        ops: list[nn.Module] = [
            nn.Conv2d(spec.in_channels, mid, spec.kernel, stride=spec.stride,
                      padding=spec.kernel // 2, bias=False),
            _bn(mid),
            act,
        ]
        if spec.se_ratio > 0:
            ops.append(SqueezeExcite(mid, max(1, int(spec.in_channels * spec.se_ratio))))
        ops += [nn.Conv2d(mid, spec.out_channels, 1, bias=False), _bn(spec.out_channels)]
        self.block = nn.Sequential(*ops)

    def forward(self, x):
        out = self.block(x)
        return x + out if self.spec.has_skip else out


def build_block(spec: BlockSpec) -> nn.Module:
    return FusedMBConv(spec) if spec.kind == "fused" else MBConv(spec)
