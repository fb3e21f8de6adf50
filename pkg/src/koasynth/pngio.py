"""Single-channel 8-bit PNG reading and writing."""

from __future__ import annotations

import os

import numpy as np
from PIL import Image, PngImagePlugin


def read_png(path: str | os.PathLike) -> np.ndarray:
    """Read a grayscale PNG as a 2-D uint8 array."""
    with Image.open(path) as im:
        if im.mode != "L":
            im = im.convert("L")
        return np.asarray(im, dtype=np.uint8)


def write_png(path: str | os.PathLike, pixels: np.ndarray, text: dict[str, str] | None = None) -> None:
    """Write a 2-D uint8 array as a grayscale PNG, with optional text chunks.

    Text chunks carry provenance (config hash, seed); output bytes are
    deterministic for identical pixels and text.
    """
    arr = np.asarray(pixels)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D grayscale array, got shape {arr.shape}")
    info = PngImagePlugin.PngInfo()
    for key in sorted(text or {}):
        info.add_text(key, str(text[key]))
    Image.fromarray(arr.astype(np.uint8), mode="L").save(path, format="PNG", pnginfo=info)


def write_png_rgb(path: str | os.PathLike, pixels: np.ndarray, text: dict[str, str] | None = None) -> None:
    """Write an H x W x 3 uint8 array as an RGB PNG."""
    arr = np.asarray(pixels)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an H x W x 3 array, got shape {arr.shape}")
    info = PngImagePlugin.PngInfo()
    for key in sorted(text or {}):
        info.add_text(key, str(text[key]))
    Image.fromarray(arr.astype(np.uint8), mode="RGB").save(path, format="PNG", pnginfo=info)
