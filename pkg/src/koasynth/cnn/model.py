"""Staged-disease classifier: stem, block stages, flatten head with a 256-unit ELU layer."""

from __future__ import annotations

import dataclasses

import torch
import torch.nn as nn

from ..config import ClassifierConfig, StageGroup
from .blocks import build_block


def _expand_plan(plan: tuple[StageGroup, ...]) -> list:
    blocks = []
    for group in plan:
        for i in range(group.repeat):
            spec = group.block
            if i > 0:
                # Repeats within a group keep the output width and stride 1.
                spec = dataclasses.replace(spec, in_channels=spec.out_channels, stride=1)
            blocks.append(spec)
    return blocks


class StageClassifier(nn.Module):
    """Three-way stage classifier used as the adversarial-attack target.

    forward() returns logits; probabilities come from predict helpers. The
    pre-flattening feature map (input to the head) is what attention maps
    attribute over, and the 256-unit dense activations feed the embedding
    visualizations.
    """

    def __init__(self, cfg: ClassifierConfig):
        super().__init__()
        self.cfg = cfg
        blocks = _expand_plan(cfg.stage_plan)
        if blocks and blocks[0].in_channels != cfg.stem_channels:
            raise ValueError(
                f"stem emits {cfg.stem_channels} channels but the first block expects "
                f"{blocks[0].in_channels}"
            )
        self.stem = nn.Sequential(
            nn.Conv2d(1, cfg.stem_channels, 3, stride=2, padding=1, bias=False),
            nn.BatchNorm2d(cfg.stem_channels),
            nn.SiLU(inplace=True),
        )
        self.stages = nn.Sequential(*[build_block(spec) for spec in blocks])

        downsamples = 1 + sum(1 for b in blocks if b.stride == 2)
        self.feature_hw = cfg.input_size // (2**downsamples)
        if self.feature_hw < 1:
            raise ValueError("stage plan downsamples below 1x1 at this input size")
        feature_channels = blocks[-1].out_channels if blocks else cfg.stem_channels
        self.feature_dim = feature_channels * self.feature_hw * self.feature_hw
        self.dense = nn.Linear(self.feature_dim, cfg.head_units)
        self.act = nn.ELU()
        self.out = nn.Linear(cfg.head_units, cfg.num_classes)

    def features(self, x: torch.Tensor) -> torch.Tensor:
        """Pre-flattening feature map, shape N x C x h x w."""
        if x.shape[-2:] != (self.cfg.input_size, self.cfg.input_size):
            raise ValueError(
                f"expected {self.cfg.input_size}x{self.cfg.input_size} input, got {tuple(x.shape[-2:])}"
            )
        return self.stages(self.stem(x))

    def dense_features(self, x: torch.Tensor) -> torch.Tensor:
        """256-unit post-ELU activations (the embedding feature source)."""
        return self.act(self.dense(torch.flatten(self.features(x), 1)))

    def head_from_features(self, feats: torch.Tensor) -> torch.Tensor:
        return self.out(self.act(self.dense(torch.flatten(feats, 1))))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head_from_features(self.features(x))
