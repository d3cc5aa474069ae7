"""Retrieving mid-level elements for mined patterns via an inverted index."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import reduce
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np

from .featstore import FeatureStore
from .miner import Pattern
from .transact import TransactionDatabase, pos_item


class EmptyElementError(ValueError):
    """No positive transaction contains the pattern."""


@dataclass(frozen=True)
class InvertedIndex:
    """Per-item ascending posting lists of transaction positions."""

    postings: dict[int, np.ndarray]
    size: int

    def posting(self, item: int) -> np.ndarray:
        return self.postings.get(item, np.empty(0, dtype=np.int64))


@dataclass(frozen=True)
class MidLevelElement:
    """The patches (store record positions) sharing one pattern."""

    pattern: Pattern
    members: tuple[int, ...]
    member_images: frozenset[int]

    def __post_init__(self):
        if not self.members:
            raise ValueError("an element has at least one member")


def build_inverted_index(db: TransactionDatabase) -> InvertedIndex:
    lists: dict[int, list[int]] = {}
    for pos, t in enumerate(db.transactions):
        for item in (*t.items, t.class_item):
            lists.setdefault(item, []).append(pos)
    postings = {item: np.asarray(v, dtype=np.int64) for item, v in lists.items()}
    return InvertedIndex(postings, len(db.transactions))


def retrieve_element(pattern: Pattern, index: InvertedIndex,
                     db: TransactionDatabase, store: FeatureStore) -> MidLevelElement:
    """Positive-class patches whose transactions contain the pattern."""
    lists = [index.posting(i) for i in pattern.items]
    lists.append(index.posting(pos_item(db.dim)))
    lists.sort(key=len)
    members = reduce(lambda a, b: np.intersect1d(a, b, assume_unique=True), lists)
    if members.size == 0:
        raise EmptyElementError(f"pattern {pattern.items} has no positive members")
    images = frozenset(store.records[int(i)].image_id for i in members)
    return MidLevelElement(pattern, tuple(int(i) for i in members), images)


def coverage(element: MidLevelElement) -> int:
    """Number of distinct source images behind the element."""
    return len(element.member_images)


def _selection_key(element: MidLevelElement):
    p = element.pattern
    return (-coverage(element), -p.support, len(p.items), p.items)


def select_top_patterns(elements: Sequence[MidLevelElement], x: int) -> list[MidLevelElement]:
    """The x elements with highest coverage; ties by support, then itemset order."""
    if x < 1:
        raise ValueError("x must be >= 1")
    return sorted(elements, key=_selection_key)[:x]


def write_elements(elements: Iterable[MidLevelElement], destination) -> None:
    own = isinstance(destination, (str, Path))
    f: TextIO = open(destination, "w") if own else destination
    try:
        for e in elements:
            obj = {
                "category": e.pattern.category,
                "items": list(e.pattern.items),
                "support": e.pattern.support,
                "confidence": e.pattern.confidence,
                "members": list(e.members),
                "images": sorted(e.member_images),
                "coverage": coverage(e),
            }
            f.write(json.dumps(obj) + "\n")
    finally:
        if own:
            f.close()


def read_elements(source) -> list[MidLevelElement]:
    own = isinstance(source, (str, Path))
    f: TextIO = open(source) if own else source
    try:
        out = []
        for line in f:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            pattern = Pattern(tuple(obj["items"]), obj["support"],
                              obj["confidence"], obj["category"])
            out.append(MidLevelElement(pattern, tuple(obj["members"]),
                                       frozenset(obj["images"])))
        return out
    finally:
        if own:
            f.close()
