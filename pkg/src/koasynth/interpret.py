"""Saliency overlays, Grad-CAM attention maps, training-progress strips, embeddings."""

from __future__ import annotations

import csv
import functools
import importlib.resources
from dataclasses import dataclass

import numpy as np
import torch
from PIL import Image, ImageDraw
from scipy.optimize import linear_sum_assignment

from .dataset import StageLabel
from .gan.training import Direction, to_model_range, transform
from .tsne import tsne_embed

SALIENCY_ALPHA_DEFAULT = 0.4


@functools.cache
def inferno_colormap() -> np.ndarray:
    """Bundled 256-entry perceptual colormap, rows of (r, g, b) uint8."""
    ref = importlib.resources.files("koasynth").joinpath("assets/inferno_rgb.csv")
    with ref.open() as fh:
        rows = list(csv.reader(fh))
    table = np.array([[int(v) for v in row] for row in rows[1:]], dtype=np.uint8)
    if table.shape != (256, 3):
        raise ValueError(f"colormap asset must be 256 x 3, got {table.shape}")
    return table


def saliency_overlay(
    original: np.ndarray,
    transformed: np.ndarray,
    colormap: np.ndarray | None = None,
    alpha: float = SALIENCY_ALPHA_DEFAULT,
) -> np.ndarray:
    """Blend the colormapped transform over the reverse-colormapped original.

    out = alpha * C(transformed) + (1 - alpha) * C_rev(original), rounded and
    clamped per channel. Bright warm tones mark additive edits, deep cool
    tones the reverse.
    """
    if original.shape != transformed.shape:
        raise ValueError(f"shape mismatch: {original.shape} vs {transformed.shape}")
    table = inferno_colormap() if colormap is None else np.asarray(colormap)
    reversed_table = table[::-1]
    fore = table[np.asarray(transformed, dtype=np.uint8)].astype(np.float64)
    back = reversed_table[np.asarray(original, dtype=np.uint8)].astype(np.float64)
    blend = alpha * fore + (1.0 - alpha) * back
    return np.clip(np.floor(blend + 0.5), 0, 255).astype(np.uint8)


def difference_map(original: np.ndarray, transformed: np.ndarray) -> np.ndarray:
    """Signed pixel change (transformed - original) as int16; auxiliary to the overlay."""
    if original.shape != transformed.shape:
        raise ValueError(f"shape mismatch: {original.shape} vs {transformed.shape}")
    return transformed.astype(np.int16) - original.astype(np.int16)


@dataclass(frozen=True)
class Heatmap:
    values: np.ndarray  # 2-D, in [0, 1]; max == 1 unless identically zero
    source_layer: str


def cam_from_features(features: np.ndarray, grads: np.ndarray) -> np.ndarray:
    """Gradient-weighted combination: ReLU(sum_k mean(grad_k) * feature_k), max-normalized."""
    f = np.asarray(features, dtype=np.float64)
    g = np.asarray(grads, dtype=np.float64)
    if f.shape != g.shape or f.ndim != 3:
        raise ValueError(f"features and grads must share a C x h x w shape, got {f.shape} vs {g.shape}")
    weights = g.mean(axis=(1, 2))
    cam = np.maximum((weights[:, None, None] * f).sum(axis=0), 0.0)
    peak = cam.max()
    return cam / peak if peak > 0 else cam


def grad_cam(model, img: np.ndarray, target_class: StageLabel | int) -> Heatmap:
    """Class-score attribution at the pre-flattening feature layer, upsampled to input size."""
    model.eval()
    batch = to_model_range(np.asarray(img))
    feats = model.features(batch)
    if feats.ndim != 4 or feats.shape[-1] < 1 or feats.shape[-2] < 1:
        raise ValueError("attribution layer has no spatial extent")
    feats.retain_grad()
    score = model.head_from_features(feats)[0, int(target_class)]
    model.zero_grad(set_to_none=True)
    score.backward()
    cam = cam_from_features(
        feats[0].detach().numpy(), feats.grad[0].detach().numpy()
    )
    size = batch.shape[-2:]
    upsampled = torch.nn.functional.interpolate(
        torch.from_numpy(cam)[None, None], size=size, mode="bilinear", align_corners=False
    )[0, 0].numpy()
    peak = upsampled.max()
    if peak > 0:
        upsampled = upsampled / peak
    return Heatmap(values=np.clip(upsampled, 0.0, 1.0), source_layer="pre_flatten")


def heatmap_to_rgb(heatmap: Heatmap, base: np.ndarray | None = None, alpha: float = 0.5) -> np.ndarray:
    """Colormapped heatmap, optionally blended over a grayscale base image."""
    table = inferno_colormap()
    colored = table[np.clip(np.floor(heatmap.values * 255 + 0.5), 0, 255).astype(np.uint8)]
    if base is None:
        return colored
    gray = np.repeat(np.asarray(base, dtype=np.float64)[..., None], 3, axis=2)
    blend = alpha * colored.astype(np.float64) + (1 - alpha) * gray
    return np.clip(np.floor(blend + 0.5), 0, 255).astype(np.uint8)


def progress_strip(
    bundles,
    probe: np.ndarray,
    direction: Direction,
    gutter: int = 2,
    label_height: int = 12,
) -> np.ndarray:
    """Horizontal strip of transform(probe) across stored checkpoints in epoch order.

    Width is k * w + (k - 1) * gutter; an extra top band carries epoch labels.
    """
    bundles = sorted(bundles, key=lambda b: b.epoch)
    if not bundles:
        raise ValueError("no checkpoints to render")
    frames = [transform(probe, direction, b) for b in bundles]
    h, w = frames[0].shape
    width = len(frames) * w + (len(frames) - 1) * gutter
    canvas = np.zeros((h + label_height, width), dtype=np.uint8)
    for i, frame in enumerate(frames):
        canvas[label_height:, i * (w + gutter) : i * (w + gutter) + w] = frame
    image = Image.fromarray(canvas, mode="L")
    draw = ImageDraw.Draw(image)
    for i, bundle in enumerate(bundles):
        draw.text((i * (w + gutter) + 1, 0), f"e{bundle.epoch}", fill=255)
    return np.asarray(image)


def progress_panel(bundles, probe: np.ndarray, gutter: int = 2, label_height: int = 12) -> np.ndarray:
    """Two rows sharing the epoch axis: one per generator direction."""
    future = progress_strip(bundles, probe, Direction.TOWARD_FUTURE, gutter, label_height)
    past = progress_strip(bundles, probe, Direction.TOWARD_PAST, gutter, label_height)
    return np.concatenate([future, past], axis=0)


@dataclass(frozen=True)
class EmbeddingPoint:
    x: float
    y: float
    source: str  # OriginalTest | SyntheticFuture | SyntheticPast
    stage: StageLabel
    image_id: str


def embed_points(
    features: np.ndarray,
    sources: list[str],
    stages: list[StageLabel],
    image_ids: list[str],
    perplexity: float = 30.0,
    seed: int = 0,
    n_iter: int = 1000,
) -> list[EmbeddingPoint]:
    """t-SNE over classifier dense-layer features, tagged with provenance."""
    coords = tsne_embed(features, perplexity=perplexity, seed=seed, n_iter=n_iter)
    return [
        EmbeddingPoint(float(cx), float(cy), src, stage, image_id)
        for (cx, cy), src, stage, image_id in zip(coords, sources, stages, image_ids)
    ]


def _normalize_unit_square(coords: np.ndarray) -> np.ndarray:
    lo = coords.min(axis=0)
    span = coords.max(axis=0) - lo
    out = np.full_like(coords, 0.5)
    for axis in range(coords.shape[1]):
        if span[axis] > 0:
            out[:, axis] = (coords[:, axis] - lo[axis]) / span[axis]
    return out


@dataclass
class GridAssignment:
    cells: list[tuple[int, int]]  # (row, col) per point, injective
    grid_side: int
    total_cost: float


def _as_coords(points) -> np.ndarray:
    if not isinstance(points, np.ndarray) and len(points) and isinstance(points[0], EmbeddingPoint):
        return np.array([[p.x, p.y] for p in points], dtype=np.float64)
    return np.asarray(points, dtype=np.float64)


def rasterize_grid(points: np.ndarray | list[EmbeddingPoint]) -> GridAssignment:
    """Assign embedded points to a ceil(sqrt(N))-square grid, one point per cell.

    Coordinates are min-max normalized to the unit square and matched to cell
    centers minimizing total squared displacement: exactly (Hungarian) for
    N <= 400, greedy nearest-cell with conflict eviction beyond that.
    """
    coords = _as_coords(points)
    n = coords.shape[0]
    if n == 0:
        return GridAssignment(cells=[], grid_side=0, total_cost=0.0)
    side = int(np.ceil(np.sqrt(n)))
    unit = _normalize_unit_square(coords)
    centers = np.array(
        [[(r + 0.5) / side, (c + 0.5) / side] for r in range(side) for c in range(side)]
    )
    # cost[i, j]: squared displacement of point i to cell j, x<->col and y<->row
    cost = ((unit[:, None, 0] - centers[None, :, 1]) ** 2
            + (unit[:, None, 1] - centers[None, :, 0]) ** 2)

    if n <= 400:
        rows, cols = linear_sum_assignment(cost)
        chosen = np.empty(n, dtype=int)
        chosen[rows] = cols
    else:
        chosen = _greedy_evict(cost)
    cells = [(int(j) // side, int(j) % side) for j in chosen]
    total = float(cost[np.arange(n), chosen].sum())
    return GridAssignment(cells=cells, grid_side=side, total_cost=total)


def _greedy_evict(cost: np.ndarray) -> np.ndarray:
    """Nearest-free-cell assignment; a closer newcomer evicts the occupant, which re-queues."""
    n, m = cost.shape
    preference = np.argsort(cost, axis=1)
    owner = np.full(m, -1, dtype=int)
    assigned = np.full(n, -1, dtype=int)
    cursor = np.zeros(n, dtype=int)
    queue = list(range(n))
    guard = 0
    while queue:
        guard += 1
        if guard > 50 * n * m:
            raise RuntimeError("eviction assignment failed to settle")
        i = queue.pop(0)
        while True:
            cell = preference[i, cursor[i]]
            holder = owner[cell]
            if holder == -1:
                owner[cell] = i
                assigned[i] = cell
                break
            if cost[i, cell] < cost[holder, cell]:
                owner[cell] = i
                assigned[i] = cell
                assigned[holder] = -1
                cursor[holder] += 1
                queue.append(holder)
                break
            cursor[i] += 1
    return assigned


def render_raster_montage(images: list[np.ndarray], assignment: GridAssignment) -> np.ndarray:
    """Tile images into their assigned grid cells; unassigned cells stay black."""
    if not images:
        raise ValueError("no images to tile")
    tile = images[0].shape[0]
    side = assignment.grid_side
    canvas = np.zeros((side * tile, side * tile), dtype=np.uint8)
    for img, (r, c) in zip(images, assignment.cells):
        canvas[r * tile : (r + 1) * tile, c * tile : (c + 1) * tile] = img
    return canvas


def fit_linear(points: np.ndarray | list[EmbeddingPoint]) -> tuple[float, float, float]:
    """Ordinary least squares y = slope * x + intercept over embedded points; returns (slope, intercept, r^2)."""
    coords = _as_coords(points)
    if coords.shape[0] < 2:
        raise ValueError("need at least 2 points for a linear fit")
    x, y = coords[:, 0], coords[:, 1]
    sxx = ((x - x.mean()) ** 2).sum()
    if sxx == 0:
        raise ValueError("degenerate fit: all x coordinates are equal")
    slope = ((x - x.mean()) * (y - y.mean())).sum() / sxx
    intercept = y.mean() - slope * x.mean()
    residuals = y - (slope * x + intercept)
    ss_res = (residuals**2).sum()
    ss_tot = ((y - y.mean()) ** 2).sum()
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), float(r2)


def write_embedding_csv(path, points: list[EmbeddingPoint], header_lines=None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header_lines or []:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(["image_id", "x", "y", "source", "stage"])
        for p in points:
            writer.writerow([p.image_id, f"{p.x:.6f}", f"{p.y:.6f}", p.source, p.stage.display])
