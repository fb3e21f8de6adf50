"""Classifier quality metrics and the one-shot adversarial attack protocol."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from .dataset import ImageRecord, StageLabel
from .gan.training import Direction, transform

N_CLASSES = 3


@dataclass
class ConfusionMatrix:
    """3x3 counts; rows are true stages, columns predicted stages."""

    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts)) / self.total

    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)


@dataclass
class ClassReport:
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    accuracy: float
    zero_division_flags: list[str] = field(default_factory=list)

    @property
    def macro(self) -> dict[str, float]:
        return {
            "precision": float(self.precision.mean()),
            "recall": float(self.recall.mean()),
            "f1": float(self.f1.mean()),
        }

    @property
    def weighted(self) -> dict[str, float]:
        w = self.support / self.support.sum()
        return {
            "precision": float((self.precision * w).sum()),
            "recall": float((self.recall * w).sum()),
            "f1": float((self.f1 * w).sum()),
        }


def confusion_and_report(truths, predictions) -> tuple[ConfusionMatrix, ClassReport]:
    """Confusion counts plus per-class precision/recall/F1 with macro and weighted averages.

    Zero denominators yield 0.0 and are flagged rather than raising.
    """
    t = np.asarray([int(v) for v in truths])
    p = np.asarray([int(v) for v in predictions])
    if t.size == 0:
        raise ValueError("cannot build a report from empty label sequences")
    if t.shape != p.shape:
        raise ValueError(f"label sequences differ in length: {t.shape} vs {p.shape}")
    counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(counts, (t, p), 1)

    precision = np.zeros(N_CLASSES)
    recall = np.zeros(N_CLASSES)
    f1 = np.zeros(N_CLASSES)
    flags: list[str] = []
    for c in range(N_CLASSES):
        tp = counts[c, c]
        fp = counts[:, c].sum() - tp
        fn = counts[c, :].sum() - tp
        name = StageLabel(c).display
        if tp + fp > 0:
            precision[c] = tp / (tp + fp)
        else:
            flags.append(f"precision[{name}]")
        if tp + fn > 0:
            recall[c] = tp / (tp + fn)
        else:
            flags.append(f"recall[{name}]")
        if precision[c] + recall[c] > 0:
            f1[c] = 2 * precision[c] * recall[c] / (precision[c] + recall[c])
        else:
            flags.append(f"f1[{name}]")
    matrix = ConfusionMatrix(counts)
    report = ClassReport(
        precision=precision,
        recall=recall,
        f1=f1,
        support=counts.sum(axis=1),
        accuracy=matrix.accuracy,
        zero_division_flags=flags,
    )
    return matrix, report


def _auc_mann_whitney(scores: np.ndarray, positives: np.ndarray) -> float:
    """Rank-based AUC with midranks for ties."""
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    n_pos = int(positives.sum())
    n_neg = len(scores) - n_pos
    rank_sum = ranks[positives].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_auc_ovr(scores, truths) -> tuple[float | None, float | None, float | None]:
    """One-vs-rest AUC per class from probability triples; absent classes report None."""
    s = np.asarray(scores, dtype=np.float64)
    t = np.asarray([int(v) for v in truths])
    if s.ndim != 2 or s.shape[1] != N_CLASSES:
        raise ValueError(f"scores must be N x {N_CLASSES} probability triples, got {s.shape}")
    out: list[float | None] = []
    for c in range(N_CLASSES):
        positives = t == c
        if positives.all() or not positives.any():
            out.append(None)
            continue
        out.append(_auc_mann_whitney(s[:, c], positives))
    return tuple(out)


def rank_by_confidence(classifier, images: list[ImageRecord], target_class: StageLabel, k: int) -> list[ImageRecord]:
    """Top-k records by predicted probability of target_class, stable under ties."""
    if k < 0:
        raise ValueError("k must be non-negative")
    if not images:
        return []
    if k > len(images):
        warnings.warn(f"requested top {k} of a {len(images)}-image cohort; returning all")
        k = len(images)
    probs = classifier.predict_proba(np.stack([rec.pixels for rec in images]))
    target = probs[:, int(target_class)]
    order = sorted(range(len(images)), key=lambda i: (-target[i], i))
    return [images[i] for i in order[:k]]


def percent(count: int, total: int) -> float:
    """count/total as a percentage, rounded half-up to 2 decimals (exact in decimal arithmetic)."""
    if total <= 0:
        raise ValueError("total must be positive")
    value = Decimal(count * 100) / Decimal(total)
    return float(value.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def tabulate_shift(counts: dict[StageLabel, int]) -> dict[StageLabel, float]:
    """Per-class percentages of a prediction tally; sums to 100.00 up to rounding."""
    total = sum(counts.values())
    return {stage: percent(counts.get(stage, 0), total) for stage in StageLabel}


@dataclass
class AttackImageRecord:
    image_id: str
    pre_confidence: float
    post_probabilities: tuple[float, float, float]

    @property
    def post_class(self) -> StageLabel:
        return StageLabel(int(np.argmax(self.post_probabilities)))


@dataclass
class AttackReport:
    original_class: StageLabel
    direction: Direction
    counts: dict[StageLabel, int]
    percentages: dict[StageLabel, float]
    per_image: list[AttackImageRecord]

    @property
    def cohort_size(self) -> int:
        return sum(self.counts.values())


def one_shot_attack(gan_state, classifier, cohort: list[ImageRecord], direction: Direction) -> AttackReport:
    """Transform each cohort image exactly once, re-predict, tally the argmax shifts."""
    if not cohort:
        raise ValueError("attack cohort is empty")
    stages = {rec.stage for rec in cohort}
    if len(stages) != 1:
        raise ValueError(f"attack cohort mixes stages: {sorted(s.display for s in stages)}")
    original_class = stages.pop()

    pixels = np.stack([rec.pixels for rec in cohort])
    pre = classifier.predict_proba(pixels)
    transformed = transform(pixels, direction, gan_state)
    post = classifier.predict_proba(transformed)

    counts = {stage: 0 for stage in StageLabel}
    per_image = []
    for rec, pre_row, post_row in zip(cohort, pre, post):
        predicted = StageLabel(int(np.argmax(post_row)))
        counts[predicted] += 1
        per_image.append(
            AttackImageRecord(
                image_id=rec.path,
                pre_confidence=float(pre_row[int(original_class)]),
                post_probabilities=tuple(float(v) for v in post_row),
            )
        )
    return AttackReport(
        original_class=original_class,
        direction=direction,
        counts=counts,
        percentages=tabulate_shift(counts),
        per_image=per_image,
    )


def render_classification_table(report: ClassReport) -> str:
    """Text table mirroring the published classification-report layout."""
    names = [StageLabel(c).display for c in range(N_CLASSES)]
    header = ["Metrics", *names, "WeightedAvg", "MacroAvg"]
    rows = []
    for metric in ("precision", "recall", "f1"):
        values = getattr(report, metric)
        rows.append(
            [metric.capitalize() if metric != "f1" else "F1-score"]
            + [f"{v:.3f}" for v in values]
            + [f"{report.weighted[metric]:.3f}", f"{report.macro[metric]:.3f}"]
        )
    widths = [max(len(str(r[i])) for r in [header, *rows]) for i in range(len(header))]
    lines = ["  ".join(str(v).ljust(w) for v, w in zip(row, widths)) for row in [header, *rows]]
    lines.append(f"Overall accuracy: {report.accuracy:.3f}")
    if report.zero_division_flags:
        lines.append("Zero-denominator metrics reported as 0: " + ", ".join(report.zero_division_flags))
    return "\n".join(lines)


def render_attack_table(reports: list[AttackReport]) -> str:
    """Text table of class shifts; zero-count classes print as '-'."""
    header = ["OriginalClass", "Direction", *(s.display for s in StageLabel)]
    rows = []
    for rep in reports:
        cells = []
        for stage in StageLabel:
            cells.append(f"{rep.percentages[stage]:.2f}%" if rep.counts[stage] else "-")
        rows.append([rep.original_class.display, rep.direction.value, *cells])
    widths = [max(len(str(r[i])) for r in [header, *rows]) for i in range(len(header))]
    return "\n".join("  ".join(str(v).ljust(w) for v, w in zip(row, widths)) for row in [header, *rows])
