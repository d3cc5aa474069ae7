"""Turning activation vectors into itemset transactions.

Items are 0-based activation dimension indices; the class markers are the two
extra ids ``dim`` (positive) and ``dim + 1`` (negative). Only strictly
positive components become items, so a transaction can be shorter than K.
Ties between equal magnitudes are broken toward the lower index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np

from .featstore import FeatureStore, PatchRecord

ItemSet = tuple[int, ...]


class EmptyDatabaseError(ValueError):
    """Raised when an operation needs at least one transaction."""


def pos_item(dim: int) -> int:
    return dim


def neg_item(dim: int) -> int:
    return dim + 1


def top_k_indices(activation, k: int) -> ItemSet:
    """Ascending indices of the k largest strictly positive components.

    Fewer than k strictly positive components yield a shorter result; an
    all-zero vector yields the empty tuple.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    a = np.asarray(activation, dtype=np.float64)
    if a.size and float(a.min()) < 0.0:
        raise ValueError("activation must be non-negative")
    order = np.argsort(-a, kind="stable")  # descending value, ascending index on ties
    order = order[a[order] > 0.0][:k]
    return tuple(sorted(int(i) for i in order))


@dataclass(frozen=True)
class Transaction:
    """Top-K feature items of one patch plus its class marker."""

    items: ItemSet
    class_item: int

    def __post_init__(self):
        prev = -1
        for i in self.items:
            if i <= prev:
                raise ValueError("items must be strictly ascending")
            prev = i
        if self.items and self.items[0] < 0:
            raise ValueError("items must be non-negative")


def make_transaction(record: PatchRecord, k: int, target_category: int) -> Transaction:
    dim = record.activation.size
    marker = pos_item(dim) if record.class_label == target_category else neg_item(dim)
    return Transaction(top_k_indices(record.activation, k), marker)


@dataclass(frozen=True)
class TransactionDatabase:
    """All transactions of one mining run against one target category."""

    dim: int
    k: int
    transactions: tuple[Transaction, ...]
    pos_count: int
    neg_count: int
    target_category: int = -1

    def __post_init__(self):
        pos = pos_item(self.dim)
        neg = neg_item(self.dim)
        n_pos = 0
        for t in self.transactions:
            if len(t.items) > self.k:
                raise ValueError(f"transaction has {len(t.items)} items, bound is {self.k}")
            if t.items and t.items[-1] >= self.dim:
                raise ValueError("feature items must be < dim")
            if t.class_item == pos:
                n_pos += 1
            elif t.class_item != neg:
                raise ValueError(f"class_item must be {pos} or {neg}")
        if n_pos != self.pos_count or len(self.transactions) - n_pos != self.neg_count:
            raise ValueError("pos_count/neg_count inconsistent with transactions")

    def __len__(self) -> int:
        return len(self.transactions)

    @classmethod
    def from_transactions(cls, dim: int, k: int, transactions: Iterable[Transaction],
                          target_category: int = -1) -> "TransactionDatabase":
        txs = tuple(transactions)
        n_pos = sum(1 for t in txs if t.class_item == pos_item(dim))
        return cls(dim, k, txs, n_pos, len(txs) - n_pos, target_category)


def build_database(store: FeatureStore, k: int, target_category: int) -> TransactionDatabase:
    """One transaction per store record, order preserved."""
    if len(store) == 0:
        raise EmptyDatabaseError("cannot build a transaction database from an empty store")
    txs = tuple(make_transaction(r, k, target_category) for r in store.records)
    return TransactionDatabase.from_transactions(store.dim, k, txs, target_category)


def dump_transactions(db: TransactionDatabase, sink: TextIO) -> None:
    """Flat-file dump: one line per transaction, ascending ids, class item last."""
    for t in db.transactions:
        sink.write(" ".join(map(str, (*t.items, t.class_item))))
        sink.write("\n")


def sparsify_topk(activation, k: int) -> np.ndarray:
    """Keep the top-k positive magnitudes, zero the rest."""
    a = np.asarray(activation, dtype=np.float64)
    out = np.zeros_like(a)
    idx = list(top_k_indices(a, k))
    out[idx] = a[idx]
    return out


def binarize_topk(activation, k: int) -> np.ndarray:
    """1.0 at the top-k positive positions, 0.0 elsewhere."""
    a = np.asarray(activation, dtype=np.float64)
    out = np.zeros_like(a)
    out[list(top_k_indices(a, k))] = 1.0
    return out


def max_pool_vectors(vectors: Sequence) -> np.ndarray:
    """Componentwise maximum over a non-empty list of equal-length vectors."""
    if len(vectors) == 0:
        raise ValueError("max_pool_vectors needs at least one vector")
    stack = np.asarray([np.asarray(v, dtype=np.float64) for v in vectors])
    if stack.ndim != 2:
        raise ValueError("vectors must all have the same length")
    return stack.max(axis=0)
