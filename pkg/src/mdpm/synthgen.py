"""Deterministic planted-pattern dataset generator and recovery scorer.

Each patch draws sparse rectified Gaussian noise: a dimension fires with
probability ``noise_density`` and then carries ``|N(0, noise_spread)|``.
Planted patches additionally get their concept's item dimensions boosted by a
margin (default 8x the noise spread) large enough to pin them into any
reasonable top-K. Sparsity matters: with dense noise, every patch fills its
top-K with ranked noise dimensions, and (concept dim, noise dim) pairs become
frequent and confident enough to pollute mining at realistic thresholds.

The stream comes from numpy's default PCG64 generator seeded from the spec,
so a given spec reproduces byte-identical stores anywhere.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .featstore import FeatureStore, PatchRecord, sample_patch_grid
from .miner import Pattern
from .transact import ItemSet


@dataclass(frozen=True)
class SynthSpec:
    dim: int = 64
    categories: int = 3
    images_per_category: int = 100
    patches_per_image: int = 25
    concepts_per_category: int = 2
    items_per_concept: int = 4
    noise_spread: float = 1.0
    noise_density: float = 0.03  # fraction of dimensions carrying noise
    signal: float | None = None  # None: 8x the noise spread
    p_plant: float = 0.6
    p_leak: float = 0.02
    seed: int = 0          # drives the patch stream
    concept_seed: int = 0  # drives concept layout, so train/test sets share it

    def __post_init__(self):
        if self.items_per_concept > self.dim:
            raise ValueError("items_per_concept cannot exceed dim")
        if not 0.0 <= self.noise_density <= 1.0:
            raise ValueError("noise_density must be in [0, 1]")
        if not 0.0 < self.p_plant <= 1.0:
            raise ValueError("p_plant must be in (0, 1]")
        if not 0.0 <= self.p_leak < self.p_plant:
            raise ValueError("need 0 <= p_leak < p_plant")
        if self.p_plant + self.p_leak > 1.0:
            raise ValueError("p_plant + p_leak cannot exceed 1")
        if self.noise_spread < 0:
            raise ValueError("noise_spread must be non-negative")
        if self.signal is None:
            object.__setattr__(self, "signal", 8.0 * max(self.noise_spread, 1.0))
        if self.signal <= 0:
            raise ValueError("signal must be positive")
        for name in ("dim", "categories", "images_per_category", "patches_per_image",
                     "concepts_per_category", "items_per_concept"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass(frozen=True)
class Concept:
    concept_id: int
    category: int
    items: ItemSet


@dataclass(frozen=True)
class GroundTruth:
    concepts: tuple[Concept, ...]
    assignments: tuple[int, ...]  # per record: concept id or -1

    def concepts_of(self, category: int) -> list[Concept]:
        return [c for c in self.concepts if c.category == category]


def _concept_items(spec: SynthSpec, rng: np.random.Generator) -> list[ItemSet]:
    total = spec.categories * spec.concepts_per_category
    m = spec.items_per_concept
    if total * m <= spec.dim:
        # disjoint blocks carved from one permutation
        perm = rng.permutation(spec.dim)
        return [tuple(sorted(int(v) for v in perm[g * m:(g + 1) * m]))
                for g in range(total)]
    return [tuple(sorted(int(v) for v in rng.choice(spec.dim, size=m, replace=False)))
            for _ in range(total)]


def _grid_positions(patches_per_image: int):
    per_axis = math.ceil(math.sqrt(patches_per_image))
    side = 128 + 32 * (per_axis - 1)
    return sample_patch_grid(side, side, 128, 32)[:patches_per_image]


def generate_dataset(spec: SynthSpec) -> tuple[FeatureStore, GroundTruth]:
    """Deterministic store plus the planted concepts and per-patch assignments."""
    rng = np.random.default_rng(spec.seed)
    item_sets = _concept_items(spec, np.random.default_rng(spec.concept_seed))
    concepts = tuple(
        Concept(g, g // spec.concepts_per_category, items)
        for g, items in enumerate(item_sets)
    )
    grid = _grid_positions(spec.patches_per_image)
    j = spec.concepts_per_category
    records: list[PatchRecord] = []
    assignments: list[int] = []
    image_id = 0
    for cat in range(spec.categories):
        own = [c.concept_id for c in concepts if c.category == cat]
        foreign = [c.concept_id for c in concepts if c.category != cat]
        for _ in range(spec.images_per_category):
            for geom in grid:
                act = np.abs(rng.normal(0.0, spec.noise_spread, spec.dim))
                act *= rng.random(spec.dim) < spec.noise_density
                u = rng.random()
                concept_id = -1
                if u < spec.p_plant:
                    concept_id = own[int(rng.integers(j))]
                elif u < spec.p_plant + spec.p_leak and foreign:
                    concept_id = foreign[int(rng.integers(len(foreign)))]
                if concept_id >= 0:
                    act[list(concepts[concept_id].items)] += spec.signal
                records.append(PatchRecord(image_id, cat, geom,
                                           act.astype(np.float32)))
                assignments.append(concept_id)
            image_id += 1
    return FeatureStore(spec.dim, records), GroundTruth(concepts, tuple(assignments))


@dataclass(frozen=True)
class RecoveryReport:
    precision: float
    recall: float
    concept_hits: tuple[tuple[int, ...], ...]  # per concept: matching pattern indices
    no_patterns: bool = False


def planted_recovery_report(mined: Sequence[Pattern], truth: GroundTruth) -> RecoveryReport:
    """A concept is hit when a mined pattern of length >= 2 sits inside it."""
    concept_sets = [set(c.items) for c in truth.concepts]
    hits: list[list[int]] = [[] for _ in truth.concepts]
    matched = 0
    for idx, p in enumerate(mined):
        items = set(p.items)
        found = False
        for g, cset in enumerate(concept_sets):
            if len(items) >= 2 and items <= cset:
                hits[g].append(idx)
                found = True
        if found:
            matched += 1
    if not mined:
        return RecoveryReport(1.0, 0.0, tuple(() for _ in truth.concepts),
                              no_patterns=True)
    recall = sum(1 for h in hits if h) / len(truth.concepts)
    return RecoveryReport(matched / len(mined), recall,
                          tuple(tuple(h) for h in hits))


def write_ground_truth(truth: GroundTruth, destination) -> None:
    obj = {
        "concepts": [
            {"id": c.concept_id, "category": c.category, "items": list(c.items)}
            for c in truth.concepts
        ],
        "assignments": list(truth.assignments),
    }
    own = isinstance(destination, (str, Path))
    f = open(destination, "w") if own else destination
    try:
        json.dump(obj, f)
    finally:
        if own:
            f.close()


def read_ground_truth(source) -> GroundTruth:
    own = isinstance(source, (str, Path))
    f = open(source) if own else source
    try:
        obj = json.load(f)
    finally:
        if own:
            f.close()
    concepts = tuple(Concept(c["id"], c["category"], tuple(c["items"]))
                     for c in obj["concepts"])
    return GroundTruth(concepts, tuple(obj["assignments"]))
