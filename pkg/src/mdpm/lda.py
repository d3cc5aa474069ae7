"""Closed-form linear discriminant detectors and greedy ensemble merging.

A detector is the solution of ``covariance @ w = mean(positives) - mean``,
computed with a symmetric positive-definite factorization (never an explicit
inverse). Background statistics come from a pool of activations with shrinkage
``lam * max(trace/dim, 1e-6) * I`` added to the n-1-normalized sample
covariance, since the raw pool covariance can be singular at small scale.

Merging is greedy: seed with the highest-coverage element, grow the group with
every remaining element whose mean detector response beats the threshold,
retrain, and repeat until the group is stable; then emit the group and its
final detector and continue with what is left. The threshold is in raw score
units and therefore data-scale dependent.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .elements import MidLevelElement, coverage
from .featstore import FeatureStore

_SHRINK_FLOOR = 1e-6
DEFAULT_SHRINKAGE = 0.01
DEFAULT_MERGE_THRESHOLD = 150.0  # calibrated for 4096-d rectified fc activations

_BANK_MAGIC = b"MDPMDET1"


class SingularCovarianceError(np.linalg.LinAlgError):
    """The (unshrunk) covariance is not positive-definite."""


@dataclass(frozen=True)
class BackgroundStats:
    """Mean and shrunk covariance of a background activation pool."""

    mean: np.ndarray
    covariance: np.ndarray
    shrinkage: float
    sample_count: int


@dataclass(frozen=True)
class Detector:
    """Linear patch scorer with the input-element indices it was merged from."""

    weights: np.ndarray
    source_element_ids: tuple[int, ...] = ()


@dataclass(frozen=True)
class MergedElement:
    """Union of the member patches of one merged group."""

    members: tuple[int, ...]
    member_images: frozenset[int]
    sources: tuple[int, ...]

    @property
    def coverage(self) -> int:
        return len(self.member_images)


def estimate_background(activations, shrinkage: float = DEFAULT_SHRINKAGE) -> BackgroundStats:
    """Sample mean/covariance of the pool plus scaled-identity shrinkage."""
    x = np.asarray(activations, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need at least two equal-length background vectors")
    if shrinkage < 0:
        raise ValueError("shrinkage must be non-negative")
    n, d = x.shape
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    if shrinkage > 0:
        scale = max(float(np.trace(cov)) / d, _SHRINK_FLOOR)
        cov = cov + shrinkage * scale * np.eye(d)
    return BackgroundStats(mean, cov, float(shrinkage), n)


def _make_solver(stats: BackgroundStats) -> Callable[[np.ndarray], np.ndarray]:
    try:
        factor = scipy.linalg.cho_factor(stats.covariance, lower=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise SingularCovarianceError(
            f"covariance is not positive-definite: {exc}") from exc
    return lambda rhs: scipy.linalg.cho_solve(factor, rhs)


def train_lda(positives, stats: BackgroundStats,
              source_element_ids: tuple[int, ...] = ()) -> Detector:
    """Solve covariance @ w = mean(positives) - background mean."""
    x = np.asarray(positives, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("need at least one positive vector")
    if x.shape[1] != stats.mean.size:
        raise ValueError("positive dimension does not match the statistics")
    rhs = x.mean(axis=0) - stats.mean
    return Detector(_make_solver(stats)(rhs), source_element_ids)


def score_element(member_activations, detector: Detector) -> float:
    """Mean inner product of the detector with the member activations."""
    x = np.asarray(member_activations, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("need at least one member activation")
    return float((x @ detector.weights).mean())


def ensemble_merge(elements: Sequence[MidLevelElement], store: FeatureStore,
                   stats: BackgroundStats, th: float
                   ) -> tuple[list[MergedElement], list[Detector]]:
    """Greedy merge of redundant elements; returns aligned groups and detectors.

    The emitted groups partition the input element list. Seeds are chosen by
    maximum coverage, ties broken by pattern support then canonical itemset
    order; the grown group is retrained until no remaining element scores
    above ``th``.
    """
    if not elements:
        raise ValueError("need at least one element to merge")
    if not np.isfinite(th):
        raise ValueError("merge threshold must be finite")
    solve = _make_solver(stats)
    acts = {i: store.activations(e.members).astype(np.float64)
            for i, e in enumerate(elements)}

    def seed_key(i: int):
        e = elements[i]
        return (-coverage(e), -e.pattern.support, len(e.pattern.items), e.pattern.items)

    remaining = set(range(len(elements)))
    merged: list[MergedElement] = []
    detectors: list[Detector] = []
    while remaining:
        seed = min(remaining, key=seed_key)
        group = [seed]
        in_group = {seed}
        while True:
            member_positions = sorted({m for i in group for m in elements[i].members})
            positives = store.activations(member_positions).astype(np.float64)
            weights = solve(positives.mean(axis=0) - stats.mean)
            admitted = [j for j in sorted(remaining - in_group)
                        if float((acts[j] @ weights).mean()) > th]
            if not admitted:
                break
            group.extend(admitted)
            in_group.update(admitted)
        images = frozenset(store.records[m].image_id for m in member_positions)
        sources = tuple(sorted(group))
        merged.append(MergedElement(tuple(member_positions), images, sources))
        detectors.append(Detector(weights, sources))
        remaining -= in_group
    return merged, detectors


def write_detector_bank(detectors: Sequence[Detector], dim: int, destination) -> None:
    """Binary bank: magic, u32 version/dim/count, then per-detector provenance + f64 weights."""
    own = isinstance(destination, (str, Path))
    f = open(destination, "wb") if own else destination
    try:
        f.write(_BANK_MAGIC)
        f.write(struct.pack("<III", 1, dim, len(detectors)))
        for det in detectors:
            w = np.asarray(det.weights, dtype="<f8")
            if w.size != dim:
                raise ValueError("detector dimension does not match the bank")
            f.write(struct.pack("<I", len(det.source_element_ids)))
            f.write(struct.pack(f"<{len(det.source_element_ids)}I",
                                *det.source_element_ids))
            f.write(w.tobytes())
    finally:
        if own:
            f.close()


def read_detector_bank(source) -> tuple[int, list[Detector]]:
    own = isinstance(source, (str, Path))
    f = open(source, "rb") if own else source
    try:
        if f.read(8) != _BANK_MAGIC:
            raise ValueError("not a detector bank file")
        version, dim, count = struct.unpack("<III", f.read(12))
        if version != 1:
            raise ValueError(f"unsupported detector bank version {version}")
        detectors = []
        for _ in range(count):
            (nsrc,) = struct.unpack("<I", f.read(4))
            sources = struct.unpack(f"<{nsrc}I", f.read(4 * nsrc)) if nsrc else ()
            weights = np.frombuffer(f.read(8 * dim), dtype="<f8").copy()
            detectors.append(Detector(weights, tuple(sources)))
        return dim, detectors
    finally:
        if own:
            f.close()
