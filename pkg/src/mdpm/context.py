"""Firing-type analysis of detections against tri-label pixel masks.

Pixels carry one of three labels: background/scene (0), the target category
(1), or any other annotated category (2); the three sets partition the image,
so the per-box overlap ratios sum to one exactly. Boxes are clipped to the
image before counting, and the ratios are returned as exact rationals.

A detection is a scene-context firing when the background ratio exceeds 9/10;
otherwise it fires on object context or on the target object depending on
which of the other two ratios dominates. The exact tie is reported as
unresolved rather than silently picking a side.
"""

from __future__ import annotations

import struct
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .featstore import PatchGeometry

LABEL_SCENE = 0
LABEL_TARGET = 1
LABEL_OTHER = 2

_MASK_MAGIC = b"MDPM-MSK"


class FiringType(Enum):
    SCENE_CONTEXT = "scene_context"
    OBJECT_CONTEXT = "object_context"
    GROUND_TRUTH_OBJECT = "ground_truth_object"
    UNRESOLVED = "unresolved"


# plurality ties resolved toward the object evidence
_PRECEDENCE = {
    FiringType.GROUND_TRUTH_OBJECT: 3,
    FiringType.OBJECT_CONTEXT: 2,
    FiringType.SCENE_CONTEXT: 1,
    FiringType.UNRESOLVED: 0,
}


@dataclass(frozen=True)
class PixelMasks:
    """Per-pixel tri-label raster; values must be 0, 1, or 2."""

    labels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.labels, dtype=np.uint8)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError("masks must be a non-empty 2-d raster")
        if int(arr.max()) > 2:
            raise ValueError("mask values must be 0 (scene), 1 (target), or 2 (other)")
        object.__setattr__(self, "labels", arr)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


def overlap_ratios(box: PatchGeometry, masks: PixelMasks
                   ) -> tuple[Fraction, Fraction, Fraction]:
    """(target, other, scene) pixel fractions of the clipped box; sums to 1."""
    x0 = max(box.x, 0)
    y0 = max(box.y, 0)
    x1 = min(box.x + box.w, masks.width)
    y1 = min(box.y + box.h, masks.height)
    if x0 >= x1 or y0 >= y1:
        raise ValueError("box lies fully outside the image")
    region = masks.labels[y0:y1, x0:x1]
    total = region.size
    n_target = int((region == LABEL_TARGET).sum())
    n_other = int((region == LABEL_OTHER).sum())
    return (Fraction(n_target, total), Fraction(n_other, total),
            Fraction(total - n_target - n_other, total))


def classify_firing(ratios) -> FiringType:
    o_gt, o_ot, o_sc = ratios
    for r in ratios:
        if r < 0 or r > 1:
            raise ValueError("ratios must lie in [0, 1]")
    if abs(float(o_gt + o_ot + o_sc) - 1.0) > 1e-12:
        raise ValueError("ratios must sum to 1")
    scene_cut = Fraction(9, 10) if isinstance(o_sc, Fraction) else 0.9
    if o_sc > scene_cut:
        return FiringType.SCENE_CONTEXT
    if o_ot > o_gt:
        return FiringType.OBJECT_CONTEXT
    if o_ot < o_gt:
        return FiringType.GROUND_TRUTH_OBJECT
    return FiringType.UNRESOLVED


def element_firing_type(per_image_top_detections: Sequence[Sequence[tuple[PatchGeometry, float]]],
                        masks_per_image: Sequence[PixelMasks],
                        score_threshold: float) -> FiringType:
    """Plurality firing type over the best above-threshold detection per image."""
    if len(per_image_top_detections) != len(masks_per_image):
        raise ValueError("need one detection list per image")
    votes: Counter = Counter()
    for detections, masks in zip(per_image_top_detections, masks_per_image):
        if not detections:
            continue
        box, score = max(detections, key=lambda d: d[1])
        if score > score_threshold:
            votes[classify_firing(overlap_ratios(box, masks))] += 1
    if not votes:
        return FiringType.UNRESOLVED
    return max(votes, key=lambda t: (votes[t], _PRECEDENCE[t]))


def firing_report(types: Sequence[FiringType]) -> dict:
    """Per-type counts and percentages for a set of elements."""
    counts = Counter(types)
    total = len(types)
    return {
        "total": total,
        "counts": {t.value: counts.get(t, 0) for t in FiringType},
        "percentages": {t.value: (100.0 * counts.get(t, 0) / total if total else 0.0)
                        for t in FiringType},
    }


def write_maskfile(masks: PixelMasks, destination) -> None:
    """16-byte header (magic, u16 w, u16 h, 4 pad bytes) + row-major labels."""
    own = isinstance(destination, (str, Path))
    f = open(destination, "wb") if own else destination
    try:
        f.write(_MASK_MAGIC)
        f.write(struct.pack("<HH4x", masks.width, masks.height))
        f.write(masks.labels.astype(np.uint8).tobytes())
    finally:
        if own:
            f.close()


def read_maskfile(source) -> PixelMasks:
    own = isinstance(source, (str, Path))
    f = open(source, "rb") if own else source
    try:
        if f.read(8) != _MASK_MAGIC:
            raise ValueError("not a mask file")
        w, h = struct.unpack("<HH4x", f.read(8))
        blob = f.read(w * h)
        if len(blob) != w * h:
            raise ValueError("mask file truncated")
        return PixelMasks(np.frombuffer(blob, dtype=np.uint8).reshape(h, w).copy())
    finally:
        if own:
            f.close()
