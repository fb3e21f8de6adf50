"""Declarative layer-by-layer network descriptions with countable parameters.

The builders mirror the translation networks row for row: every convolution,
normalization and activation appears as its own LayerSpec so per-layer
parameter counts can be audited against the reference totals (generator
11,370,881 and discriminator 11,032,193 at the default configuration).

Bias placement rule: a convolution followed by instance normalization carries
no bias; a convolution without normalization carries one. Instance norm learns
a scale and offset per channel (2C parameters).
"""

from __future__ import annotations

from dataclasses import dataclass

from ..config import CycleGanConfig
from ..errors import ConstructionError

GENERATOR_TOTAL_PARAMS = 11_370_881
DISCRIMINATOR_TOTAL_PARAMS = 11_032_193


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # input | reflection_pad | zero_pad | conv | conv_transpose | instance_norm | activation | add
    output_shape: tuple[int, int, int]  # (H, W, C)
    params: int = 0
    filters: int | None = None
    kernel: tuple[int, int] | None = None
    stride: tuple[int, int] | None = None
    padding: str | None = None
    activation: str | None = None
    bias: bool | None = None


@dataclass(frozen=True)
class NetworkSpec:
    name: str
    layers: tuple[LayerSpec, ...]

    @property
    def total_params(self) -> int:
        return sum(layer.params for layer in self.layers)

    def parameterized_layers(self) -> list[LayerSpec]:
        return [layer for layer in self.layers if layer.params > 0]


class _SpecBuilder:
    def __init__(self, name: str, input_shape: tuple[int, int, int]):
        self.name = name
        self.shape = input_shape
        self.layers: list[LayerSpec] = [LayerSpec("input", input_shape)]

    def _check(self, kind: str, new_shape: tuple[int, int, int]) -> None:
        if min(new_shape) < 1:
            raise ConstructionError(
                f"{self.name} layer {len(self.layers)} ({kind}): "
                f"shape {self.shape} collapses to {new_shape}"
            )

    def pad(self, margin: int, kind: str = "reflection_pad") -> None:
        h, w, c = self.shape
        self.shape = (h + 2 * margin, w + 2 * margin, c)
        self.layers.append(LayerSpec(kind, self.shape))

    def pad_asym(self, total: int, kind: str = "zero_pad") -> None:
        h, w, c = self.shape
        self.shape = (h + total, w + total, c)
        self.layers.append(LayerSpec(kind, self.shape))

    def conv(self, filters: int, kernel: int, stride: int, padding: str, bias: bool,
             activation: str = "linear", transpose: bool = False) -> None:
        h, w, c = self.shape
        if padding == "valid":
            oh, ow = (h - kernel) // stride + 1, (w - kernel) // stride + 1
        elif padding == "same":
            if transpose:
                oh, ow = h * stride, w * stride
            else:
                oh, ow = -(-h // stride), -(-w // stride)
        else:
            raise ConstructionError(f"{self.name}: unknown padding mode {padding!r}")
        params = kernel * kernel * c * filters + (filters if bias else 0)
        kind = "conv_transpose" if transpose else "conv"
        new_shape = (oh, ow, filters)
        self._check(kind, new_shape)
        self.shape = new_shape
        self.layers.append(
            LayerSpec(kind, self.shape, params=params, filters=filters,
                      kernel=(kernel, kernel), stride=(stride, stride),
                      padding=padding, activation=activation, bias=bias)
        )

    def instance_norm(self) -> None:
        c = self.shape[2]
        self.layers.append(LayerSpec("instance_norm", self.shape, params=2 * c))

    def activation(self, name: str) -> None:
        self.layers.append(LayerSpec("activation", self.shape, activation=name))

    def add_skip(self, other_shape: tuple[int, int, int]) -> None:
        if other_shape != self.shape:
            raise ConstructionError(
                f"{self.name} layer {len(self.layers)} (add): "
                f"skip shape {other_shape} != branch shape {self.shape}"
            )
        self.layers.append(LayerSpec("add", self.shape))

    def build(self) -> NetworkSpec:
        return NetworkSpec(self.name, tuple(self.layers))


def build_generator(cfg: CycleGanConfig) -> NetworkSpec:
    """Resnet-style generator: 7x7 stem, two downsamplers, residual trunk, two upsamplers, tanh head."""
    size, bf = cfg.image_size, cfg.base_filters
    b = _SpecBuilder("generator", (size, size, 1))
    b.pad(3)
    b.conv(bf, 7, 1, "valid", bias=False)
    b.instance_norm()
    b.activation("relu")
    for mult in (2, 4):
        b.conv(bf * mult, 3, 2, "same", bias=False)
        b.instance_norm()
        b.activation("relu")
    trunk = b.shape
    for _ in range(cfg.residual_blocks):
        b.pad(1)
        b.conv(bf * 4, 3, 1, "valid", bias=False)
        b.instance_norm()
        b.activation("relu")
        b.pad(1)
        b.conv(bf * 4, 3, 1, "valid", bias=False)
        b.instance_norm()
        b.add_skip(trunk)
    for mult in (2, 1):
        b.conv(bf * mult, 3, 2, "same", bias=False, transpose=True)
        b.instance_norm()
        b.activation("relu")
    b.pad(3)
    b.conv(1, 7, 1, "valid", bias=True, activation="tanh")
    spec = b.build()
    if b.shape[:2] != (size, size):
        raise ConstructionError(f"generator output shape {b.shape} != input {size}x{size}")
    return spec


def build_discriminator(cfg: CycleGanConfig) -> NetworkSpec:
    """Patch discriminator: three stride-2 downsamplers, one stride-1 widening, linear patch head."""
    size, bf = cfg.image_size, cfg.base_filters
    b = _SpecBuilder("discriminator", (size, size, 1))
    b.conv(bf * 2, 4, 2, "same", bias=True)
    b.activation("leaky_relu")
    for mult in (4, 8):
        b.conv(bf * mult, 4, 2, "same", bias=False)
        b.instance_norm()
        b.activation("leaky_relu")
    b.conv(bf * 16, 4, 1, "same", bias=False)
    b.instance_norm()
    b.activation("leaky_relu")
    b.conv(1, 4, 1, "same", bias=True)
    return b.build()


def check_expected_counts(spec: NetworkSpec, expected_total: int) -> list[str]:
    """Return human-readable mismatch diagnostics (empty when the spec checks out)."""
    problems = []
    if spec.total_params != expected_total:
        problems.append(
            f"{spec.name}: total parameter count {spec.total_params:,} != expected {expected_total:,}"
        )
    return problems
