"""Laterality standardization, negative-image inversion and contrast equalization."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dataset import ImageRecord, Side

NEGATIVE_TAU_DEFAULT = 20.0


class ConstantImageWarning(UserWarning):
    """Equalization is undefined on a constant image; it is passed through."""


def flip_lateral(pixels: np.ndarray, side: Side) -> np.ndarray:
    """Mirror right-knee images so every record reads as a left orientation."""
    if side is Side.RIGHT:
        return np.fliplr(pixels).copy()
    return pixels


def invert_channels(pixels: np.ndarray) -> np.ndarray:
    """Invert a negative radiograph: v -> 255 - v."""
    return (255 - pixels.astype(np.int16)).astype(pixels.dtype)


def detect_negative(pixels: np.ndarray, tau: float = NEGATIVE_TAU_DEFAULT) -> bool:
    """Heuristic negative detector: corner patches brighter than the center by > tau.

    In a positive radiograph bone (center) is bright and background (corners)
    dark; a negative swaps them. Corner patches span 10% of each side, the
    central patch 40%. Constant images tie and read as positives.
    """
    arr = np.asarray(pixels, dtype=np.float64)
    m, n = arr.shape
    pm, pn = max(1, round(0.10 * m)), max(1, round(0.10 * n))
    corners = np.concatenate(
        [
            arr[:pm, :pn].ravel(),
            arr[:pm, n - pn :].ravel(),
            arr[m - pm :, :pn].ravel(),
            arr[m - pm :, n - pn :].ravel(),
        ]
    )
    cm, cn = max(1, round(0.40 * m)), max(1, round(0.40 * n))
    r0, c0 = (m - cm) // 2, (n - cn) // 2
    center = arr[r0 : r0 + cm, c0 : c0 + cn]
    return float(corners.mean() - center.mean()) > tau


def is_constant(pixels: np.ndarray) -> bool:
    return int(pixels.max()) == int(pixels.min())


def equalize_contrast(pixels: np.ndarray) -> np.ndarray:
    """Equalize contrast through the cumulative distribution of the 256 intensity bins.

    Each value v maps to 255 * (cdf(v) - cdf_min) / (mn - cdf_min) where cdf_min
    is the smallest nonzero cumulative count. Results are rounded half-up and
    clamped to [0, 255]. A constant image has a zero denominator and is
    returned unchanged with a ConstantImageWarning.
    """
    arr = np.asarray(pixels)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"expected a non-empty 2-D image, got shape {arr.shape}")
    hist = np.bincount(arr.astype(np.uint8).ravel(), minlength=256)
    cdf = np.cumsum(hist)
    mn = arr.size
    cdf_min = int(cdf[np.nonzero(hist)[0][0]])
    if mn == cdf_min:
        warnings.warn("constant image passed through equalization unchanged", ConstantImageWarning)
        return arr.astype(np.uint8).copy()
    lut = np.floor(255.0 * (cdf - cdf_min) / (mn - cdf_min) + 0.5)
    lut = np.clip(lut, 0, 255).astype(np.uint8)
    return lut[arr.astype(np.uint8)]


@dataclass(frozen=True)
class PreprocessResult:
    pixels: np.ndarray
    flipped: bool
    inverted: bool
    constant_warning: bool

    def provenance(self) -> dict[str, bool]:
        return {
            "flipped": self.flipped,
            "inverted": self.inverted,
            "constant_warning": self.constant_warning,
        }


def preprocess_pipeline(rec: ImageRecord, tau: float = NEGATIVE_TAU_DEFAULT) -> PreprocessResult:
    """Flip -> conditional negative inversion -> contrast equalization, in that order.

    A manifest-supplied negative hint, when present, overrides the detector.
    """
    img = flip_lateral(rec.pixels, rec.side)
    flipped = rec.side is Side.RIGHT
    inverted = rec.negative_hint if rec.negative_hint is not None else detect_negative(img, tau)
    if inverted:
        img = invert_channels(img)
    constant = is_constant(img)
    if not constant:
        img = equalize_contrast(img)
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConstantImageWarning)
            img = equalize_contrast(img)
    return PreprocessResult(pixels=img, flipped=flipped, inverted=inverted, constant_warning=constant)
