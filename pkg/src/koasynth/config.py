"""Dataclass configs for every pipeline stage, plus the key-value config file codec.

Config files are plain text, one `key = value` per line, `#` comments allowed.
Keys are the dotted paths shown by `default_config_lines()`; command-line flags
override file values. The config hash stamped into artifacts is a SHA-256 over
the canonical serialized form.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field, fields


@dataclass(frozen=True)
class BlockSpec:
    """One inverted-bottleneck block: MBConv or Fused-MBConv."""

    kind: str  # "mbconv" | "fused"
    expansion: int
    in_channels: int
    out_channels: int
    stride: int = 1
    se_ratio: float = 0.0
    kernel: int = 3

    def __post_init__(self):
        if self.kind not in ("mbconv", "fused"):
            raise ValueError(f"block kind must be mbconv or fused, got {self.kind!r}")
        if self.stride not in (1, 2):
            raise ValueError(f"stride must be 1 or 2, got {self.stride}")

    @property
    def has_skip(self) -> bool:
        return self.stride == 1 and self.in_channels == self.out_channels


@dataclass(frozen=True)
class StageGroup:
    """A repeated group of identical blocks; the stride applies to the first block only."""

    block: BlockSpec
    repeat: int = 1


def micro_stage_plan(width: int = 1) -> tuple[StageGroup, ...]:
    """Desk-scale stage plan: two fused stages then two MBConv stages.

    Small enough to train from scratch on a CPU, yet exercising both block
    types, squeeze-excitation and both stride regimes.
    """
    w = width
    return (
        StageGroup(BlockSpec("fused", 1, 16 * w, 16 * w, 1, 0.0), repeat=1),
        StageGroup(BlockSpec("fused", 4, 16 * w, 24 * w, 2, 0.0), repeat=2),
        StageGroup(BlockSpec("mbconv", 4, 24 * w, 32 * w, 2, 0.25), repeat=2),
        StageGroup(BlockSpec("mbconv", 4, 32 * w, 48 * w, 1, 0.25), repeat=2),
    )


def format_stage_plan(plan: tuple[StageGroup, ...]) -> str:
    return "; ".join(
        f"{g.block.kind},{g.block.expansion},{g.block.in_channels},{g.block.out_channels},"
        f"{g.block.stride},{g.block.se_ratio},{g.repeat}"
        for g in plan
    )


def parse_stage_plan(text: str) -> tuple[StageGroup, ...]:
    groups = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = [p.strip() for p in chunk.split(",")]
        if len(parts) != 7:
            raise ValueError(f"stage group needs 7 fields (kind,exp,in,out,stride,se,repeat): {chunk!r}")
        kind, exp, cin, cout, stride, se, rep = parts
        groups.append(
            StageGroup(
                BlockSpec(kind, int(exp), int(cin), int(cout), int(stride), float(se)),
                repeat=int(rep),
            )
        )
    return tuple(groups)


@dataclass(frozen=True)
class ScalingConfig:
    """Compound-scaling coefficients over a base (depth, width, resolution)."""

    alpha: float = 1.2
    beta: float = 1.1
    gamma: float = 1.15
    phi: float = 0.0
    base_depth: int = 1
    base_width: int = 16
    base_resolution: int = 64

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) < 1.0:
            raise ValueError("alpha, beta, gamma must each be >= 1")
        if self.phi < 0:
            raise ValueError("phi must be >= 0")


@dataclass(frozen=True)
class CycleGanConfig:
    image_size: int = 224
    base_filters: int = 64
    residual_blocks: int = 9
    lambda_cyc: float = 10.0
    lambda_identity: float = 0.5
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    batch_size: int = 8
    epochs: int = 155
    leaky_slope: float = 0.2
    # Reserved: replay buffer of past generator outputs for discriminator
    # updates. Off by default and not implemented.
    image_buffer: bool = False
    # Alternative reading of the identity weight: use lambda_identity as an
    # absolute weight instead of a fraction of lambda_cyc.
    identity_weight_absolute: bool = False
    checkpoint_every: int = 1
    max_steps: int = 0  # 0 = no cap; otherwise stop after this many updates

    def __post_init__(self):
        if self.image_size % 4 != 0:
            raise ValueError(f"image_size must be divisible by 4, got {self.image_size}")
        for name in ("image_size", "base_filters", "residual_blocks", "lambda_cyc",
                     "lambda_identity", "lr", "beta1", "beta2", "batch_size", "epochs"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.image_buffer:
            raise NotImplementedError("the generator-output replay buffer is reserved but not implemented")

    @property
    def identity_weight(self) -> float:
        if self.identity_weight_absolute:
            return self.lambda_identity
        return self.lambda_identity * self.lambda_cyc


@dataclass(frozen=True)
class ClassifierConfig:
    stage_plan: tuple[StageGroup, ...] = field(default_factory=micro_stage_plan)
    stem_channels: int = 16
    head_units: int = 256
    num_classes: int = 3
    input_size: int = 64
    lr: float = 2e-5
    batch_size: int = 32
    max_epochs: int = 15
    patience: int = 4
    augment: bool = True

    def __post_init__(self):
        if self.num_classes != 3:
            raise ValueError("the staged classifier is a three-class model")


@dataclass
class RunConfig:
    """Everything one pipeline invocation needs, hashable into artifact stamps."""

    seed: int = 0
    manifest: str = ""
    phantom_per_class: int = 100
    phantom_noise_sigma: float = 0.0
    phantom_image_size: int = 64
    negative_tau: float = 20.0
    fractions: tuple[float, float, float] = (0.70, 0.15, 0.15)
    gan_val_fraction: float = 0.10
    gan_domain_size: int = 0  # truncate each translation domain to this many records (0 = all)
    gan: CycleGanConfig = field(default_factory=CycleGanConfig)
    cnn: ClassifierConfig = field(default_factory=ClassifierConfig)
    attack_k: int = 100
    tsne_perplexity: float = 30.0
    tsne_iterations: int = 1000
    strip_probe_count: int = 1


def _scalar_to_text(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def config_lines(cfg: RunConfig) -> list[str]:
    """Canonical `key = value` serialization, sorted by key."""
    out: dict[str, str] = {}
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if f.name in ("gan", "cnn"):
            for sub in fields(value):
                subval = getattr(value, sub.name)
                if sub.name == "stage_plan":
                    out[f"{f.name}.{sub.name}"] = format_stage_plan(subval)
                else:
                    out[f"{f.name}.{sub.name}"] = _scalar_to_text(subval)
        elif f.name == "fractions":
            out[f.name] = ",".join(repr(x) for x in value)
        else:
            out[f.name] = _scalar_to_text(value)
    return [f"{k} = {out[k]}" for k in sorted(out)]


def config_hash(cfg: RunConfig) -> str:
    digest = hashlib.sha256("\n".join(config_lines(cfg)).encode("utf-8")).hexdigest()
    return digest[:12]


def _parse_scalar(text: str, like) -> object:
    if isinstance(like, bool):
        return text.strip().lower() in ("1", "true", "yes")
    if isinstance(like, int):
        return int(text)
    if isinstance(like, float):
        return float(text)
    return text


def apply_overrides(cfg: RunConfig, overrides: dict[str, str]) -> RunConfig:
    """Apply dotted-key string overrides to a RunConfig, returning a new config."""
    top: dict[str, object] = {}
    gan_kw: dict[str, object] = {}
    cnn_kw: dict[str, object] = {}
    for key, raw in overrides.items():
        if key.startswith("gan."):
            name = key[4:]
            proto = getattr(cfg.gan, name)  # raises AttributeError for unknown keys
            gan_kw[name] = _parse_scalar(raw, proto)
        elif key.startswith("cnn."):
            name = key[4:]
            if name == "stage_plan":
                cnn_kw[name] = parse_stage_plan(raw)
            else:
                proto = getattr(cfg.cnn, name)
                cnn_kw[name] = _parse_scalar(raw, proto)
        elif key == "fractions":
            parts = [float(p) for p in raw.split(",")]
            if len(parts) != 3:
                raise ValueError(f"fractions needs 3 comma-separated values, got {raw!r}")
            top[key] = tuple(parts)
        else:
            proto = getattr(cfg, key)
            top[key] = _parse_scalar(raw, proto)
    gan = dataclasses.replace(cfg.gan, **gan_kw) if gan_kw else cfg.gan
    cnn = dataclasses.replace(cfg.cnn, **cnn_kw) if cnn_kw else cfg.cnn
    return dataclasses.replace(cfg, gan=gan, cnn=cnn, **top)


def read_config_file(path: str) -> dict[str, str]:
    entries: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{line_no}: expected `key = value`, got {line!r}")
            key, _, value = line.partition("=")
            entries[key.strip()] = value.strip()
    return entries


def load_run_config(path: str | None = None, overrides: dict[str, str] | None = None) -> RunConfig:
    cfg = RunConfig()
    if path:
        cfg = apply_overrides(cfg, read_config_file(path))
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    return cfg


def write_config_file(path: str, cfg: RunConfig) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(config_lines(cfg)) + "\n")
