"""Dataset records, KL-grade staging, manifest ingestion and patient-aware splits."""

from __future__ import annotations

import csv
import enum
import os
import random
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleSplitError, RowValidationError, SchemaError
from .pngio import read_png

MANIFEST_COLUMNS = ("path", "patient_id", "side", "kl_grade")

# Grouped stage totals of the published radiograph corpus; used only as an
# optional checksum when a real-data manifest is supplied.
REAL_STAGE_COUNTS = {
    "NoneDoubtful": 8278,
    "Mild": 3100,
    "ModerateSevere": 2756,
}


class StageLabel(enum.IntEnum):
    """Three-way clinical grouping of KL grades, ordered by severity."""

    NONE_DOUBTFUL = 0
    MILD = 1
    MODERATE_SEVERE = 2

    @property
    def display(self) -> str:
        return _STAGE_DISPLAY[self]


_STAGE_DISPLAY = {
    StageLabel.NONE_DOUBTFUL: "NoneDoubtful",
    StageLabel.MILD: "Mild",
    StageLabel.MODERATE_SEVERE: "ModerateSevere",
}


class Side(enum.Enum):
    LEFT = "Left"
    RIGHT = "Right"


def group_kl_to_stage(kl: int) -> StageLabel:
    """Map a KL grade to its clinical stage: 0,1 -> NoneDoubtful; 2 -> Mild; 3,4 -> ModerateSevere."""
    if kl in (0, 1):
        return StageLabel.NONE_DOUBTFUL
    if kl == 2:
        return StageLabel.MILD
    if kl in (3, 4):
        return StageLabel.MODERATE_SEVERE
    raise ValueError(f"KL grade must be in 0..4, got {kl!r}")


@dataclass(eq=False)
class ImageRecord:
    """One grayscale radiograph plus metadata.

    Pixels are loaded lazily from `path` on first access; phantom records are
    constructed with pixels already in memory.
    """

    path: str
    patient_id: str
    side: Side
    kl_grade: int
    negative_hint: bool | None = None
    _pixels: np.ndarray | None = field(default=None, repr=False)

    @property
    def stage(self) -> StageLabel:
        return group_kl_to_stage(self.kl_grade)

    @property
    def pixels(self) -> np.ndarray:
        if self._pixels is None:
            self._pixels = read_png(self.path)
        return self._pixels


@dataclass
class DatasetIndex:
    records: list[ImageRecord]
    counts_by_stage: dict[StageLabel, int]

    @classmethod
    def from_records(cls, records: list[ImageRecord]) -> "DatasetIndex":
        counts = {stage: 0 for stage in StageLabel}
        for rec in records:
            counts[rec.stage] += 1
        return cls(records=list(records), counts_by_stage=counts)

    def by_stage(self, stage: StageLabel) -> list[ImageRecord]:
        return [r for r in self.records if r.stage == stage]

    def matches_real_corpus(self) -> bool:
        """Check the optional real-data checksum (grouped stage totals)."""
        return {s.display: n for s, n in self.counts_by_stage.items()} == REAL_STAGE_COUNTS


@dataclass
class Split:
    train: list[ImageRecord]
    validation: list[ImageRecord]
    test: list[ImageRecord]
    fractions: tuple[float, float, float]

    def patient_sets(self) -> tuple[set[str], set[str], set[str]]:
        return (
            {r.patient_id for r in self.train},
            {r.patient_id for r in self.validation},
            {r.patient_id for r in self.test},
        )


def _parse_side(raw: str) -> Side:
    value = raw.strip().lower()
    if value in ("left", "l"):
        return Side.LEFT
    if value in ("right", "r"):
        return Side.RIGHT
    raise ValueError(f"side must be Left or Right, got {raw!r}")


def load_manifest(path: str | os.PathLike) -> DatasetIndex:
    """Load a comma-delimited manifest with header path,patient_id,side,kl_grade.

    An optional `negative` column (0/1) overrides the negative-image detector
    downstream. Image files are not opened here; unreadable files surface on
    first pixel access.
    """
    base_dir = os.path.dirname(os.fspath(path))
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(row for row in fh if not row.startswith("#"))
        header = reader.fieldnames or []
        for column in MANIFEST_COLUMNS:
            if column not in header:
                raise SchemaError(f"manifest is missing required column {column!r}")
        has_negative = "negative" in header
        records = []
        for row_no, row in enumerate(reader, start=1):
            try:
                kl = int(row["kl_grade"])
            except (TypeError, ValueError):
                raise RowValidationError(row_no, f"kl_grade is not an integer: {row['kl_grade']!r}")
            if kl not in (0, 1, 2, 3, 4):
                raise RowValidationError(row_no, f"kl_grade must be in 0..4, got {kl}")
            try:
                side = _parse_side(row["side"])
            except ValueError as exc:
                raise RowValidationError(row_no, str(exc))
            rec_path = row["path"]
            if base_dir and not os.path.isabs(rec_path):
                rec_path = os.path.join(base_dir, rec_path)
            negative = None
            if has_negative and row["negative"] not in (None, ""):
                negative = row["negative"].strip() not in ("0", "false", "False")
            records.append(
                ImageRecord(
                    path=rec_path,
                    patient_id=row["patient_id"],
                    side=side,
                    kl_grade=kl,
                    negative_hint=negative,
                )
            )
    return DatasetIndex.from_records(records)


def save_manifest(path: str | os.PathLike, records: list[ImageRecord], header_comment: str | None = None) -> None:
    """Write records back out in the manifest interchange format."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for rec in records:
            writer.writerow([rec.path, rec.patient_id, rec.side.value, rec.kl_grade])


def _partition_counts(n_patients: int, fractions: tuple[float, float, float]) -> list[int]:
    # Largest-remainder rounding at patient granularity; ties favour the
    # earlier partition, so sizes are deterministic.
    raw = [f * n_patients for f in fractions]
    counts = [int(r) for r in raw]
    remainders = [r - c for r, c in zip(raw, counts)]
    short = n_patients - sum(counts)
    order = sorted(range(3), key=lambda i: (-remainders[i], i))
    for i in order[:short]:
        counts[i] += 1
    return counts


def split_patient_aware(
    index: DatasetIndex, fractions: tuple[float, float, float], seed: int
) -> Split:
    """Partition records at the patient level so no patient spans partitions.

    Patients are shuffled deterministically by seed, then assigned greedily to
    train/validation/test in the requested proportions (largest-remainder
    rounding, so partition sizes land within one patient of the targets).
    """
    if any(f < 0 for f in fractions):
        raise ValueError(f"fractions must be non-negative, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {fractions}")

    by_patient: dict[str, list[ImageRecord]] = {}
    for rec in index.records:
        by_patient.setdefault(rec.patient_id, []).append(rec)
    patients = list(by_patient)
    if not patients:
        raise InfeasibleSplitError("0 distinct patients cannot fill any non-empty partition")

    random.Random(seed).shuffle(patients)
    counts = _partition_counts(len(patients), fractions)
    bounds = (counts[0], counts[0] + counts[1])
    groups = (patients[: bounds[0]], patients[bounds[0] : bounds[1]], patients[bounds[1] :])

    def expand(group: list[str]) -> list[ImageRecord]:
        chosen = set(group)
        return [rec for rec in index.records if rec.patient_id in chosen]

    return Split(
        train=expand(groups[0]),
        validation=expand(groups[1]),
        test=expand(groups[2]),
        fractions=fractions,
    )
