"""Synthetic knee-joint phantoms: a desk-scale stand-in for restricted radiograph data.

A phantom is two bright horizontal "bone" bands separated by a dark joint gap.
Disease stage is a pure function of the gap width (wide = healthy, narrow =
severe); bright marginal protrusions imitate osteophytes but never decide the
label on their own.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import DatasetIndex, ImageRecord, Side, StageLabel

BACKGROUND_INTENSITY = 20

# Default stage thresholds on the gap width, in pixels at 64 x 64.
GAP_WIDE_DEFAULT = 14
GAP_NARROW_DEFAULT = 6

# Gap-width sampling ranges per stage, inclusive, at the default thresholds.
STAGE_GAP_RANGES = {
    StageLabel.NONE_DOUBTFUL: (14, 24),
    StageLabel.MILD: (7, 13),
    StageLabel.MODERATE_SEVERE: (1, 6),
}
STAGE_OSTEOPHYTE_RANGES = {
    StageLabel.NONE_DOUBTFUL: (0, 0),
    StageLabel.MILD: (0, 1),
    StageLabel.MODERATE_SEVERE: (1, 3),
}
_STAGE_TO_KL = {
    StageLabel.NONE_DOUBTFUL: 0,
    StageLabel.MILD: 2,
    StageLabel.MODERATE_SEVERE: 4,
}


@dataclass(frozen=True)
class PhantomParams:
    gap_width: int
    osteophyte_count: int = 0
    bone_intensity: int = 200
    noise_sigma: float = 0.0
    seed: int = 0
    image_size: int = 64
    gap_wide: int = GAP_WIDE_DEFAULT
    gap_narrow: int = GAP_NARROW_DEFAULT

    def __post_init__(self):
        if self.gap_width < 0:
            raise ValueError(f"gap_width must be non-negative, got {self.gap_width}")
        if self.gap_width >= self.image_size:
            raise ValueError(
                f"gap_width {self.gap_width} does not fit in a {self.image_size}-pixel-high image"
            )
        if not 0 <= self.bone_intensity <= 255:
            raise ValueError(f"bone_intensity must be in [0, 255], got {self.bone_intensity}")
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.osteophyte_count < 0:
            raise ValueError(f"osteophyte_count must be >= 0, got {self.osteophyte_count}")


def stage_for_gap(gap_width: int, wide: int = GAP_WIDE_DEFAULT, narrow: int = GAP_NARROW_DEFAULT) -> StageLabel:
    """Stage rule: gap >= wide -> NoneDoubtful, gap <= narrow -> ModerateSevere, else Mild."""
    if gap_width >= wide:
        return StageLabel.NONE_DOUBTFUL
    if gap_width <= narrow:
        return StageLabel.MODERATE_SEVERE
    return StageLabel.MILD


def _osteophyte_sites(size: int) -> list[tuple[str, int]]:
    near, far = round(0.14 * size), round(0.24 * size)
    cols = [near, far, size - 1 - far, size - 1 - near]
    return [(edge, col) for edge in ("top", "bottom") for col in cols]


def render_phantom(params: PhantomParams) -> np.ndarray:
    """Render the phantom pixels (uint8, image_size x image_size), deterministic per seed."""
    size = params.image_size
    rng = np.random.default_rng(params.seed)
    img = np.full((size, size), BACKGROUND_INTENSITY, dtype=np.float64)

    band = max(2, round(0.22 * size))
    jitter = round(0.05 * size)
    center = size // 2 + int(rng.integers(-jitter, jitter + 1)) if jitter else size // 2
    gap_lo = center - params.gap_width // 2
    gap_hi = gap_lo + params.gap_width
    img[max(0, gap_lo - band) : gap_lo, :] = params.bone_intensity
    img[gap_hi : min(size, gap_hi + band), :] = params.bone_intensity

    if params.osteophyte_count > 0 and params.gap_width > 0:
        sites = _osteophyte_sites(size)
        take = min(params.osteophyte_count, len(sites))
        chosen = rng.choice(len(sites), size=take, replace=False)
        height = max(1, min(4, params.gap_width // 2 + 1))
        half_width = max(2, round(0.06 * size))
        rows = np.arange(size)[:, None]
        cols = np.arange(size)[None, :]
        for idx in chosen:
            edge, col = sites[int(idx)]
            edge_row = gap_lo - 1 if edge == "top" else gap_hi
            inward = 1 if edge == "top" else -1
            dr = (rows - edge_row) * inward
            mask = (dr >= 0) & (((cols - col) / half_width) ** 2 + (dr / height) ** 2 <= 1.0)
            img[mask] = params.bone_intensity

    if params.noise_sigma > 0:
        img = img + rng.normal(0.0, params.noise_sigma, size=img.shape)
    return np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)


def generate_phantom(
    params: PhantomParams, patient_id: str | None = None, side: Side = Side.LEFT, path: str = ""
) -> ImageRecord:
    """Build an ImageRecord whose label follows the gap-width stage rule."""
    stage = stage_for_gap(params.gap_width, params.gap_wide, params.gap_narrow)
    return ImageRecord(
        path=path or f"phantom_{params.seed:08d}.png",
        patient_id=patient_id if patient_id is not None else f"ph{params.seed:08d}",
        side=side,
        kl_grade=_STAGE_TO_KL[stage],
        _pixels=render_phantom(params),
    )


def measure_gap_width(pixels: np.ndarray) -> int:
    """Measure the joint-gap width of a (possibly synthesized) phantom.

    Looks at the central half of the columns, thresholds the per-row mean
    profile halfway between its extremes, and returns the longest dark run
    strictly between the first and last bright rows. Robust to marginal
    osteophytes and to the soft edges of generated images.
    """
    arr = np.asarray(pixels, dtype=np.float64)
    m, n = arr.shape
    profile = arr[:, n // 4 : max(n // 4 + 1, 3 * n // 4)].mean(axis=1)
    lo, hi = profile.min(), profile.max()
    if hi - lo < 1e-9:
        return 0
    bright = profile > (hi + lo) / 2.0
    idx = np.flatnonzero(bright)
    if idx.size < 2:
        return 0
    inner = ~bright[idx[0] : idx[-1] + 1]
    best = run = 0
    for dark in inner:
        run = run + 1 if dark else 0
        best = max(best, run)
    return int(best)


def build_phantom_index(
    per_class: int,
    base_seed: int,
    noise_sigma: float = 0.0,
    image_size: int = 64,
    stages: tuple[StageLabel, ...] = tuple(StageLabel),
    records_per_patient: int = 2,
) -> DatasetIndex:
    """Generate a labeled phantom corpus with per_class records for each stage.

    Consecutive records share a synthetic patient (alternating sides) so the
    corpus exercises patient-aware splitting. Fully deterministic per base_seed.
    """
    records = []
    i = 0
    for stage in stages:
        lo_gap, hi_gap = STAGE_GAP_RANGES[stage]
        lo_ost, hi_ost = STAGE_OSTEOPHYTE_RANGES[stage]
        draw = np.random.default_rng([base_seed, int(stage)])
        for k in range(per_class):
            params = PhantomParams(
                gap_width=int(draw.integers(lo_gap, hi_gap + 1)),
                osteophyte_count=int(draw.integers(lo_ost, hi_ost + 1)),
                noise_sigma=noise_sigma,
                seed=base_seed * 1_000_000 + i,
                image_size=image_size,
            )
            patient = f"ph{base_seed}_{stage.value}_{k // records_per_patient:05d}"
            side = Side.LEFT if k % records_per_patient == 0 else Side.RIGHT
            records.append(
                generate_phantom(
                    params,
                    patient_id=patient,
                    side=side,
                    path=f"phantom_{stage.display}_{i:05d}.png",
                )
            )
            i += 1
    return DatasetIndex.from_records(records)
