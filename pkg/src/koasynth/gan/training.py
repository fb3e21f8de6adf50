"""CycleGAN training: paired generator/discriminator updates, checkpointing, inference."""

from __future__ import annotations

import csv
import dataclasses
import enum
from dataclasses import dataclass, field

import numpy as np
import torch

from ..config import CycleGanConfig
from ..errors import NumericsError
from .losses import (
    GeneratorLossParts,
    adversarial_loss,
    cycle_loss,
    identity_loss,
    total_generator_loss,
)
from .networks import PatchDiscriminator, ResnetGenerator, init_weights

CHECKPOINT_FORMAT_VERSION = 1


class Direction(enum.Enum):
    """Temporal direction of a transform along the disease axis.

    TOWARD_FUTURE runs the NoneDoubtful -> ModerateSevere generator (G),
    TOWARD_PAST its inverse (F).
    """

    TOWARD_FUTURE = "TowardFuture"
    TOWARD_PAST = "TowardPast"


def to_model_range(pixels: np.ndarray) -> torch.Tensor:
    """uint8 [0,255] image(s) -> float tensor in [-1, 1], shape N x 1 x H x W."""
    arr = np.asarray(pixels, dtype=np.float32) / 127.5 - 1.0
    if arr.ndim == 2:
        arr = arr[None]
    return torch.from_numpy(arr).unsqueeze(1)


def from_model_range(batch: torch.Tensor) -> np.ndarray:
    """Tanh-range tensor back to uint8, rounded half-up and clamped."""
    arr = (batch.detach().cpu().numpy() + 1.0) * 127.5
    arr = np.clip(np.floor(arr + 0.5), 0, 255).astype(np.uint8)
    return arr.squeeze(1)


@dataclass
class EpochLosses:
    epoch: int  # 1-based
    train: dict[str, float]
    val_g_total: float
    val_f_total: float


@dataclass
class CycleTrainState:
    G: ResnetGenerator
    F: ResnetGenerator
    D_X: PatchDiscriminator
    D_Y: PatchDiscriminator
    opt_g: torch.optim.Adam
    opt_f: torch.optim.Adam
    opt_dx: torch.optim.Adam
    opt_dy: torch.optim.Adam
    epoch: int = 0
    loss_history: list[EpochLosses] = field(default_factory=list)

    def generator_for(self, direction: Direction) -> ResnetGenerator:
        return self.G if direction is Direction.TOWARD_FUTURE else self.F

    def networks(self) -> dict[str, torch.nn.Module]:
        return {"G": self.G, "F": self.F, "D_X": self.D_X, "D_Y": self.D_Y}


def new_train_state(cfg: CycleGanConfig, seed: int = 0) -> CycleTrainState:
    nets = {}
    for i, name in enumerate(("G", "F", "D_X", "D_Y")):
        net = ResnetGenerator(cfg) if name in ("G", "F") else PatchDiscriminator(cfg)
        init_weights(net, seed=seed * 4 + i)
        nets[name] = net
    adam = lambda params: torch.optim.Adam(params, lr=cfg.lr, betas=(cfg.beta1, cfg.beta2))
    return CycleTrainState(
        G=nets["G"], F=nets["F"], D_X=nets["D_X"], D_Y=nets["D_Y"],
        opt_g=adam(nets["G"].parameters()),
        opt_f=adam(nets["F"].parameters()),
        opt_dx=adam(nets["D_X"].parameters()),
        opt_dy=adam(nets["D_Y"].parameters()),
    )


def generator_loss_parts(
    state: CycleTrainState, batch_x: torch.Tensor, batch_y: torch.Tensor
) -> tuple[GeneratorLossParts, torch.Tensor, torch.Tensor]:
    """Forward both translation cycles; returns loss parts plus the fakes for reuse."""
    fake_y = state.G(batch_x)
    fake_x = state.F(batch_y)
    parts = GeneratorLossParts(
        adv_g=adversarial_loss(None, state.D_Y(fake_y), "generator"),
        adv_f=adversarial_loss(None, state.D_X(fake_x), "generator"),
        cycle=cycle_loss(batch_x, state.F(fake_y), batch_y, state.G(fake_x)),
        identity_g=identity_loss(state.G(batch_y), batch_y),
        identity_f=identity_loss(state.F(batch_x), batch_x),
    )
    return parts, fake_x, fake_y


def train_step(
    state: CycleTrainState, batch_x: torch.Tensor, batch_y: torch.Tensor, cfg: CycleGanConfig
) -> tuple[CycleTrainState, dict[str, float]]:
    """One Adam update per network: generators on the joint total, each discriminator on its own term."""
    parts, fake_x, fake_y = generator_loss_parts(state, batch_x, batch_y)
    loss_g = total_generator_loss(parts, cfg.lambda_cyc, cfg.identity_weight)
    state.opt_g.zero_grad(set_to_none=True)
    state.opt_f.zero_grad(set_to_none=True)
    loss_g.backward()
    state.opt_g.step()
    state.opt_f.step()

    record = {
        "adv_g": float(parts.adv_g.detach()),
        "adv_f": float(parts.adv_f.detach()),
        "cycle": float(parts.cycle.detach()),
        "identity_g": float(parts.identity_g.detach()),
        "identity_f": float(parts.identity_f.detach()),
        "total_g": float(loss_g.detach()),
    }
    for name, disc, opt, real, fake in (
        ("d_x", state.D_X, state.opt_dx, batch_x, fake_x),
        ("d_y", state.D_Y, state.opt_dy, batch_y, fake_y),
    ):
        loss_d = adversarial_loss(disc(real), disc(fake.detach()), "discriminator")
        if not torch.isfinite(loss_d):
            raise NumericsError(f"non-finite value in loss term {name!r}")
        opt.zero_grad(set_to_none=True)
        loss_d.backward()
        opt.step()
        record[name] = float(loss_d.detach())
    return state, record


@torch.no_grad()
def validation_generator_totals(
    state: CycleTrainState, val_x: torch.Tensor, val_y: torch.Tensor,
    cfg: CycleGanConfig, batch_size: int | None = None,
) -> tuple[float, float]:
    """Per-generator total losses on the validation split (adv + weighted cycle + identity)."""
    bs = batch_size or cfg.batch_size
    n = min(len(val_x), len(val_y))
    g_sum = f_sum = 0.0
    batches = 0
    for lo in range(0, n, bs):
        bx, by = val_x[lo : lo + bs], val_y[lo : lo + bs]
        parts, _, _ = generator_loss_parts(state, bx, by)
        half_cycle = float(parts.cycle) / 2.0
        g_sum += float(parts.adv_g) + cfg.lambda_cyc * half_cycle + cfg.identity_weight * float(parts.identity_g)
        f_sum += float(parts.adv_f) + cfg.lambda_cyc * half_cycle + cfg.identity_weight * float(parts.identity_f)
        batches += 1
    if batches == 0:
        raise ValueError("validation split is empty")
    return g_sum / batches, f_sum / batches


def fit(
    state: CycleTrainState,
    train_x: torch.Tensor,
    train_y: torch.Tensor,
    val_x: torch.Tensor,
    val_y: torch.Tensor,
    cfg: CycleGanConfig,
    epochs: int,
    seed: int = 0,
    max_steps: int | None = None,
    checkpoint_fn=None,
    log_fn=None,
) -> list[EpochLosses]:
    """Train for `epochs` epochs (capped at max_steps total updates).

    Each epoch pairs a fresh seeded shuffle of both domains and walks them in
    batches. After every epoch the validation generator totals are recorded;
    checkpoint_fn(epoch, state) runs per cfg.checkpoint_every.
    """
    steps_done = 0
    for _ in range(epochs):
        epoch = state.epoch + 1
        rng = np.random.default_rng([seed, epoch])
        order_x = rng.permutation(len(train_x))
        order_y = rng.permutation(len(train_y))
        n_steps = min(len(order_x), len(order_y)) // cfg.batch_size
        sums: dict[str, float] = {}
        steps_this_epoch = 0
        for step in range(n_steps):
            lo = step * cfg.batch_size
            bx = train_x[order_x[lo : lo + cfg.batch_size]]
            by = train_y[order_y[lo : lo + cfg.batch_size]]
            _, record = train_step(state, bx, by, cfg)
            for key, value in record.items():
                sums[key] = sums.get(key, 0.0) + value
            steps_done += 1
            steps_this_epoch += 1
            if max_steps is not None and steps_done >= max_steps:
                break
        means = {k: v / max(1, steps_this_epoch) for k, v in sums.items()}
        g_total, f_total = validation_generator_totals(state, val_x, val_y, cfg)
        state.epoch = epoch
        entry = EpochLosses(epoch=epoch, train=means, val_g_total=g_total, val_f_total=f_total)
        state.loss_history.append(entry)
        if log_fn:
            log_fn(entry)
        if checkpoint_fn and epoch % cfg.checkpoint_every == 0:
            checkpoint_fn(epoch, state)
        if max_steps is not None and steps_done >= max_steps:
            break
    return state.loss_history


def select_checkpoint(history) -> int:
    """Epoch (1-based) minimizing the summed generator validation totals; ties go earliest."""
    entries = list(history)
    if not entries:
        raise ValueError("empty loss history")
    return min(entries, key=lambda e: (e.val_g_total + e.val_f_total, e.epoch)).epoch


def transform(pixels: np.ndarray, direction: Direction, state) -> np.ndarray:
    """Project an image toward an earlier or later disease stage.

    `state` is anything with generator_for(direction); input is scaled to
    [-1, 1], pushed through the generator, and mapped back to uint8.
    """
    gen = state.generator_for(direction)
    was_training = gen.training
    gen.eval()
    try:
        param = next(gen.parameters())
        batch = to_model_range(pixels).to(dtype=param.dtype)
        with torch.no_grad():
            out = gen(batch)
    finally:
        gen.train(was_training)
    result = from_model_range(out)
    return result[0] if np.asarray(pixels).ndim == 2 else result


@dataclass
class TransformBundle:
    """Frozen generator pair for inference-only use."""

    G: ResnetGenerator
    F: ResnetGenerator
    cfg: CycleGanConfig
    epoch: int = 0

    def generator_for(self, direction: Direction) -> ResnetGenerator:
        return self.G if direction is Direction.TOWARD_FUTURE else self.F


def save_checkpoint(path, state: CycleTrainState, cfg: CycleGanConfig, meta: dict | None = None) -> None:
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": dataclasses.asdict(cfg),
        "epoch": state.epoch,
        "meta": meta or {},
        "networks": {name: net.state_dict() for name, net in state.networks().items()},
        "optimizers": {
            "opt_g": state.opt_g.state_dict(),
            "opt_f": state.opt_f.state_dict(),
            "opt_dx": state.opt_dx.state_dict(),
            "opt_dy": state.opt_dy.state_dict(),
        },
    }
    torch.save(payload, path)


def _check_version(payload: dict, path) -> None:
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint format version {version!r}")


def load_checkpoint(path) -> tuple[CycleTrainState, CycleGanConfig]:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    _check_version(payload, path)
    cfg = CycleGanConfig(**payload["config"])
    state = new_train_state(cfg)
    for name, net in state.networks().items():
        net.load_state_dict(payload["networks"][name])
    state.opt_g.load_state_dict(payload["optimizers"]["opt_g"])
    state.opt_f.load_state_dict(payload["optimizers"]["opt_f"])
    state.opt_dx.load_state_dict(payload["optimizers"]["opt_dx"])
    state.opt_dy.load_state_dict(payload["optimizers"]["opt_dy"])
    state.epoch = payload["epoch"]
    return state, cfg


def load_transform_bundle(path) -> TransformBundle:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    _check_version(payload, path)
    cfg = CycleGanConfig(**payload["config"])
    G, F = ResnetGenerator(cfg), ResnetGenerator(cfg)
    G.load_state_dict(payload["networks"]["G"])
    F.load_state_dict(payload["networks"]["F"])
    G.eval()
    F.eval()
    return TransformBundle(G=G, F=F, cfg=cfg, epoch=payload["epoch"])


def write_history_csv(path, history, header_lines: list[str] | None = None) -> None:
    """Loss history as structured rows: epoch, term, split, value."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header_lines or []:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(["epoch", "term", "split", "value"])
        for entry in history:
            for term, value in sorted(entry.train.items()):
                writer.writerow([entry.epoch, term, "train", f"{value:.8f}"])
            writer.writerow([entry.epoch, "g_total", "val", f"{entry.val_g_total:.8f}"])
            writer.writerow([entry.epoch, "f_total", "val", f"{entry.val_f_total:.8f}"])
