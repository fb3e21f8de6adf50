"""Classifier training: light augmentation, early stopping, prediction, checkpoints."""

from __future__ import annotations

import copy
import csv
import math
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F

from ..config import ClassifierConfig
from ..dataset import Split, StageLabel
from ..gan.training import to_model_range
from .model import StageClassifier

CLASSIFIER_FORMAT_VERSION = 1
CLASS_ORDER = tuple(stage.display for stage in StageLabel)


class EarlyStopper:
    """Stop after `patience` consecutive epochs without a validation-loss improvement."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best_loss = math.inf
        self.best_epoch = 0
        self.stale = 0

    def update(self, epoch: int, val_loss: float) -> bool:
        if val_loss < self.best_loss:
            self.best_loss = val_loss
            self.best_epoch = epoch
            self.stale = 0
        else:
            self.stale += 1
        return self.stale >= self.patience


def early_stop_trace(val_losses: list[float], patience: int) -> tuple[int, int]:
    """(stop_epoch, best_epoch) for a fixed validation-loss sequence, both 1-based."""
    stopper = EarlyStopper(patience)
    for epoch, loss in enumerate(val_losses, start=1):
        if stopper.update(epoch, loss):
            return epoch, stopper.best_epoch
    return len(val_losses), stopper.best_epoch


def augment_batch(batch: torch.Tensor, rng: np.random.Generator,
                  max_rotate_deg: float = 5.0, max_translate: float = 0.05,
                  max_brightness: float = 0.10) -> torch.Tensor:
    """Small random rotations, translations and brightness scaling.

    Never flips: laterality was standardized upstream and a mirror would
    undo it.
    """
    n = batch.shape[0]
    theta = np.deg2rad(rng.uniform(-max_rotate_deg, max_rotate_deg, size=n))
    tx = rng.uniform(-max_translate, max_translate, size=n) * 2.0
    ty = rng.uniform(-max_translate, max_translate, size=n) * 2.0
    mats = np.zeros((n, 2, 3), dtype=np.float32)
    mats[:, 0, 0] = np.cos(theta)
    mats[:, 0, 1] = -np.sin(theta)
    mats[:, 1, 0] = np.sin(theta)
    mats[:, 1, 1] = np.cos(theta)
    mats[:, 0, 2] = tx
    mats[:, 1, 2] = ty
    grid = F.affine_grid(torch.from_numpy(mats), list(batch.shape), align_corners=False)
    out = F.grid_sample(batch, grid, padding_mode="border", align_corners=False)
    bright = torch.from_numpy(
        rng.uniform(1.0 - max_brightness, 1.0 + max_brightness, size=(n, 1, 1, 1)).astype(np.float32)
    )
    # brightness scales in pixel space; tensors live in [-1, 1]
    return ((out + 1.0) * bright - 1.0).clamp(-1.0, 1.0)


def split_to_tensors(split: Split) -> dict[str, tuple[torch.Tensor, torch.Tensor]]:
    out = {}
    for name, records in (("train", split.train), ("validation", split.validation), ("test", split.test)):
        if records:
            x = to_model_range(np.stack([r.pixels for r in records]))
            y = torch.tensor([int(r.stage) for r in records], dtype=torch.long)
        else:
            x, y = torch.empty(0, 1, 1, 1), torch.empty(0, dtype=torch.long)
        out[name] = (x, y)
    return out


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float


@dataclass
class TrainedClassifier:
    model: StageClassifier
    cfg: ClassifierConfig
    history: list[EpochRecord] = field(default_factory=list)
    class_order: tuple[str, ...] = CLASS_ORDER

    def predict_proba(self, images: np.ndarray, batch_size: int = 64) -> np.ndarray:
        return predict_proba(self.model, images, batch_size)


@torch.no_grad()
def _evaluate(model: StageClassifier, x: torch.Tensor, y: torch.Tensor, batch_size: int) -> tuple[float, float]:
    model.eval()
    losses, correct = 0.0, 0
    for lo in range(0, len(x), batch_size):
        bx, by = x[lo : lo + batch_size], y[lo : lo + batch_size]
        logits = model(bx)
        losses += float(F.cross_entropy(logits, by, reduction="sum"))
        correct += int((logits.argmax(dim=1) == by).sum())
    return losses / len(x), correct / len(x)


def train_classifier(
    data: Split, cfg: ClassifierConfig, seed: int = 0, log_fn=None
) -> TrainedClassifier:
    """Adam + categorical cross-entropy, early-stopped on validation loss.

    The best-validation parameters are restored at the end (also when the
    epoch budget runs out before the patience does).
    """
    tensors = split_to_tensors(data)
    train_x, train_y = tensors["train"]
    val_x, val_y = tensors["validation"]
    if len(train_x) == 0 or len(val_x) == 0:
        raise ValueError("training and validation splits must be non-empty")
    present = set(train_y.tolist())
    missing = [stage.display for stage in StageLabel if int(stage) not in present]
    if missing:
        raise ValueError(f"training split has no samples for: {', '.join(missing)}")

    torch.manual_seed(seed)
    model = StageClassifier(cfg)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    stopper = EarlyStopper(cfg.patience)
    best_state = copy.deepcopy(model.state_dict())
    history: list[EpochRecord] = []

    for epoch in range(1, cfg.max_epochs + 1):
        rng = np.random.default_rng([seed, epoch])
        order = rng.permutation(len(train_x))
        model.train()
        total = 0.0
        for lo in range(0, len(order), cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            bx, by = train_x[idx], train_y[idx]
            if cfg.augment:
                bx = augment_batch(bx, rng)
            loss = F.cross_entropy(model(bx), by)
            optimizer.zero_grad(set_to_none=True)
            loss.backward()
            optimizer.step()
            total += float(loss.detach()) * len(idx)
        val_loss, val_acc = _evaluate(model, val_x, val_y, cfg.batch_size)
        record = EpochRecord(epoch, total / len(train_x), val_loss, val_acc)
        history.append(record)
        if log_fn:
            log_fn(record)
        stop = stopper.update(epoch, val_loss)
        if stopper.best_epoch == epoch:
            best_state = copy.deepcopy(model.state_dict())
        if stop:
            break
    model.load_state_dict(best_state)
    model.eval()
    return TrainedClassifier(model=model, cfg=cfg, history=history)


def predict_proba(model: StageClassifier, images: np.ndarray, batch_size: int = 64) -> np.ndarray:
    """Softmax probabilities for a batch of uint8 images, shape N x 3."""
    arr = np.asarray(images)
    single = arr.ndim == 2
    batch = to_model_range(arr)
    model.eval()
    outs = []
    with torch.no_grad():
        for lo in range(0, len(batch), batch_size):
            outs.append(torch.softmax(model(batch[lo : lo + batch_size]), dim=1))
    probs = torch.cat(outs).numpy().astype(np.float64)
    return probs[0] if single else probs


def predict_stage(model: StageClassifier, img: np.ndarray) -> np.ndarray:
    """Probability triple (NoneDoubtful, Mild, ModerateSevere) for one image."""
    return predict_proba(model, img)


def dense_features(model: StageClassifier, images: np.ndarray, batch_size: int = 64) -> np.ndarray:
    batch = to_model_range(np.asarray(images))
    model.eval()
    outs = []
    with torch.no_grad():
        for lo in range(0, len(batch), batch_size):
            outs.append(model.dense_features(batch[lo : lo + batch_size]))
    return torch.cat(outs).numpy().astype(np.float64)


def save_classifier(path, trained: TrainedClassifier, meta: dict | None = None) -> None:
    import dataclasses as dc

    cfg_dict = dc.asdict(trained.cfg)
    from ..config import format_stage_plan

    cfg_dict["stage_plan"] = format_stage_plan(trained.cfg.stage_plan)
    torch.save(
        {
            "format_version": CLASSIFIER_FORMAT_VERSION,
            "config": cfg_dict,
            "class_order": list(trained.class_order),
            "meta": meta or {},
            "state_dict": trained.model.state_dict(),
            "history": [dc.asdict(rec) for rec in trained.history],
        },
        path,
    )


def load_classifier(path) -> TrainedClassifier:
    from ..config import parse_stage_plan

    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("format_version") != CLASSIFIER_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported classifier format version")
    cfg_dict = dict(payload["config"])
    cfg_dict["stage_plan"] = parse_stage_plan(cfg_dict["stage_plan"])
    cfg = ClassifierConfig(**cfg_dict)
    model = StageClassifier(cfg)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    history = [EpochRecord(**rec) for rec in payload["history"]]
    return TrainedClassifier(model=model, cfg=cfg, history=history,
                             class_order=tuple(payload["class_order"]))


def write_classifier_history_csv(path, history: list[EpochRecord], header_lines=None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header_lines or []:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss", "val_accuracy"])
        for rec in history:
            writer.writerow([rec.epoch, f"{rec.train_loss:.8f}", f"{rec.val_loss:.8f}", f"{rec.val_accuracy:.6f}"])
