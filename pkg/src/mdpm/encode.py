"""Image-level encodings: pattern histograms and max-pooled detector responses.

Both encoders share a spatial pyramid (default 1x1 + 2x2, five cells) and lay
the output out cell-major: entry ``cell * channels + k``. Patches are assigned
to cells by their center point, with half-open cell intervals whose last cell
is closed at the image edge.

Bag-of-Patterns counts, per cell, the patches whose non-zero activation
support contains each pattern's items, then L2-normalizes each cell block
(zero blocks stay zero). Bag-of-Elements scores every patch with every
detector and keeps, per cell and detector, the maximum over all patches of all
scales; cells no patch ever lands in hold the sentinel 0, which biases
detectors whose scores are negative everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .featstore import PatchGeometry
from .lda import Detector
from .miner import Pattern


@dataclass(frozen=True)
class PyramidLayout:
    levels: tuple[tuple[int, int], ...] = ((1, 1), (2, 2))

    def __post_init__(self):
        if not self.levels:
            raise ValueError("a pyramid needs at least one level")
        for rows, cols in self.levels:
            if rows < 1 or cols < 1:
                raise ValueError("grid shapes must be positive")

    @property
    def cells(self) -> int:
        return sum(r * c for r, c in self.levels)


DEFAULT_LAYOUT = PyramidLayout()


@dataclass(frozen=True)
class ImageEncoding:
    vector: np.ndarray
    channels: int       # patterns or detectors
    categories: int
    cells: int

    def __post_init__(self):
        if self.vector.size != self.channels * self.cells:
            raise ValueError("encoding length must equal channels * cells")


def pyramid_cell_of(geometry: PatchGeometry, image_w: int, image_h: int,
                    layout: PyramidLayout = DEFAULT_LAYOUT) -> list[int]:
    """One cell index per pyramid level, assigned by the patch center."""
    cx, cy = geometry.center
    if not (0 <= cx <= image_w and 0 <= cy <= image_h):
        raise ValueError(f"patch center ({cx}, {cy}) outside the {image_w}x{image_h} image")
    cells = []
    base = 0
    for rows, cols in layout.levels:
        col = min(int(cx * cols / image_w), cols - 1)
        row = min(int(cy * rows / image_h), rows - 1)
        cells.append(base + row * cols + col)
        base += rows * cols
    return cells


def _category_count(patterns: Sequence[Pattern]) -> int:
    seen: list[int] = []
    for p in patterns:
        if not seen or p.category != seen[-1]:
            if p.category in seen:
                raise ValueError("patterns must be ordered category-major")
            seen.append(p.category)
    return max(len(seen), 1)


def encode_bop(patches: Sequence[tuple[np.ndarray, PatchGeometry]],
               patterns: Sequence[Pattern], image_w: int, image_h: int,
               layout: PyramidLayout = DEFAULT_LAYOUT,
               normalize: bool = True) -> ImageEncoding:
    """Per-cell histogram of patterns contained in each patch's non-zero support."""
    categories = _category_count(patterns)
    k = len(patterns)
    counts = np.zeros((layout.cells, k), dtype=np.float64)
    item_sets = [frozenset(p.items) for p in patterns]
    for activation, geometry in patches:
        a = np.asarray(activation)
        nonzero = frozenset(np.nonzero(a > 0)[0].tolist())
        hits = [j for j, items in enumerate(item_sets) if items <= nonzero]
        if not hits:
            continue
        for cell in pyramid_cell_of(geometry, image_w, image_h, layout):
            counts[cell, hits] += 1.0
    if normalize:
        norms = np.linalg.norm(counts, axis=1, keepdims=True)
        np.divide(counts, norms, out=counts, where=norms > 0)
    return ImageEncoding(counts.ravel(), k, categories, layout.cells)


def encode_boe(scaled_patch_sets: Sequence[Sequence[tuple[np.ndarray, PatchGeometry]]],
               detectors: Sequence[Detector],
               image_dims: Sequence[tuple[int, int]],
               layout: PyramidLayout = DEFAULT_LAYOUT,
               categories: int = 1) -> ImageEncoding:
    """Max unit-normalized detector response per pyramid cell, pooled across scales.

    Detectors keep their raw scale while merging (thresholds there are in raw
    score units); here each one is scaled to unit norm so responses are
    comparable across detectors.
    """
    if len(scaled_patch_sets) < 1 or len(scaled_patch_sets) != len(image_dims):
        raise ValueError("need one patch list and one (w, h) pair per scale")
    if not detectors:
        raise ValueError("need at least one detector")
    weights = np.stack([np.asarray(d.weights, dtype=np.float64) for d in detectors])
    norms = np.linalg.norm(weights, axis=1, keepdims=True)
    np.divide(weights, norms, out=weights, where=norms > 0)
    t = weights.shape[0]
    best = np.full((layout.cells, t), -np.inf)
    for patch_list, (w, h) in zip(scaled_patch_sets, image_dims):
        for activation, geometry in patch_list:
            a = np.asarray(activation, dtype=np.float64)
            if a.size != weights.shape[1]:
                raise ValueError(
                    f"activation dim {a.size} does not match detector dim {weights.shape[1]}")
            scores = weights @ a
            for cell in pyramid_cell_of(geometry, w, h, layout):
                np.maximum(best[cell], scores, out=best[cell])
    best[~np.isfinite(best)] = 0.0
    return ImageEncoding(best.ravel(), t, categories, layout.cells)


def default_scale_factors(n_scales: int) -> tuple[float, ...]:
    """Resize factors spaced by sqrt(2): 1, 2^-1/2, 2^-1, ..."""
    if n_scales < 1:
        raise ValueError("need at least one scale")
    return tuple(2.0 ** (-i / 2.0) for i in range(n_scales))
