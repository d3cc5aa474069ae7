"""Association-rule mining over itemset transactions.

``mine_rules`` is a breadth-first, level-wise search: level 1 and level 2 are
counted with vectorised dense key counting, deeper levels with prefix-join
candidate generation, subset pruning, and per-candidate bitset intersection.
Candidates are pruned by support anti-monotonicity and, additionally, by the
anti-monotone bound count(P + consequent) > supp_min*conf_min*N that every
qualifying pattern must satisfy.

All threshold tests are exact: a count passes a fractional threshold t iff
count >= floor(t*N) + 1, with t held as an exact rational; confidence checks
are cross-multiplied arbitrary-precision integer comparisons. Supports and
confidences on the returned patterns are exact count ratios rendered as
floats, so the optimized miner and the brute-force oracle agree bit for bit.
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import floor
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

from .transact import EmptyDatabaseError, ItemSet, TransactionDatabase

# level-2 dense pair counting allocates two int64 arrays of F*F entries
_DENSE_PAIR_LIMIT = 64_000_000
_BRUTEFORCE_ITEM_LIMIT = 20


class UndefinedConfidenceError(ValueError):
    """Confidence is undefined when the antecedent never occurs."""


class BruteForceScaleError(ValueError):
    """The exhaustive oracle refuses databases it cannot enumerate."""


@dataclass(frozen=True)
class Pattern:
    """A mined itemset with its exact support and confidence."""

    items: ItemSet
    support: float
    confidence: float
    category: int = -1

    def __post_init__(self):
        if not self.items:
            raise ValueError("a pattern has at least one item")
        if not 0.0 < self.support <= 1.0:
            raise ValueError("support must be in (0, 1]")
        if not 0.0 < self.confidence <= 1.0:
            raise ValueError("confidence must be in (0, 1]")


@dataclass(frozen=True)
class MiningConfig:
    supp_min: float = 0.0001
    conf_min: float = 0.3
    min_len: int = 2
    max_len: int = 8
    consequent: int | None = None  # None: the positive class item (db.dim)

    def __post_init__(self):
        if not 0.0 <= self.supp_min <= 1.0:
            raise ValueError("supp_min must be in [0, 1]")
        if not 0.0 <= self.conf_min <= 1.0:
            raise ValueError("conf_min must be in [0, 1]")
        if not 1 <= self.min_len <= self.max_len:
            raise ValueError("need 1 <= min_len <= max_len")


def _contains(transaction, itemset: ItemSet) -> bool:
    items = transaction.items
    for i in itemset:
        if i == transaction.class_item:
            continue
        lo, hi = 0, len(items)
        while lo < hi:  # binary search; items are ascending
            mid = (lo + hi) // 2
            if items[mid] < i:
                lo = mid + 1
            else:
                hi = mid
        if lo == len(items) or items[lo] != i:
            return False
    return True


def support_count(db: TransactionDatabase, itemset) -> int:
    """Number of transactions containing ``itemset`` (class items included)."""
    key = tuple(sorted(set(itemset)))
    return sum(1 for t in db.transactions if _contains(t, key))


def support(db: TransactionDatabase, itemset) -> float:
    """Fraction of transactions containing ``itemset``."""
    if len(db) == 0:
        raise EmptyDatabaseError("support over an empty database")
    return support_count(db, itemset) / len(db)


def confidence(db: TransactionDatabase, antecedent, consequent: int) -> float:
    """Conditional frequency of ``consequent`` among transactions with ``antecedent``."""
    base = support_count(db, antecedent)
    if base == 0:
        raise UndefinedConfidenceError("antecedent has zero support")
    joint = support_count(db, tuple(antecedent) + (consequent,))
    return joint / base


def _min_count_exceeding(threshold: Fraction, n: int) -> int:
    """Smallest integer c with c > threshold * n."""
    return floor(threshold * n) + 1


def _conf_passes(cnt_pos: int, cnt: int, conf_min: Fraction) -> bool:
    return cnt_pos * conf_min.denominator > conf_min.numerator * cnt


def _popcount(words: np.ndarray) -> int:
    return int(np.bitwise_count(words).sum())


def _make_bitset(tids: np.ndarray, n_words: int) -> np.ndarray:
    bits = np.zeros(n_words, dtype=np.uint64)
    np.bitwise_or.at(bits, tids >> 6,
                     np.left_shift(np.uint64(1), (tids & 63).astype(np.uint64)))
    return bits


def _apriori_candidates(prev: list[tuple[int, ...]]) -> list[tuple[int, ...]]:
    """Join (k-1)-sets sharing a prefix; keep joins whose subsets are all frequent."""
    prev_set = set(prev)
    groups: dict[tuple[int, ...], list[int]] = defaultdict(list)
    for t in prev:
        groups[t[:-1]].append(t[-1])
    cands = []
    for prefix, lasts in groups.items():
        lasts.sort()
        for ai in range(len(lasts)):
            for bi in range(ai + 1, len(lasts)):
                cand = prefix + (lasts[ai], lasts[bi])
                # dropping either of the last two yields the join parents,
                # so only the remaining (k-1)-subsets need checking
                if all(cand[:j] + cand[j + 1:] in prev_set
                       for j in range(len(cand) - 2)):
                    cands.append(cand)
    cands.sort()
    return cands


def _frequent_pairs(matrix: np.ndarray, cons_in_t: np.ndarray, f: int,
                    min_cnt: int, min_pos: int) -> list[tuple[int, int, int, int]]:
    """(c1, c2, count, pos_count) for every surviving within-transaction pair."""
    n, width = matrix.shape
    if f * f <= _DENSE_PAIR_LIMIT:
        pair_cnt = np.zeros(f * f, dtype=np.int64)
        pair_pos = np.zeros(f * f, dtype=np.int64)
        chunk = max(1, min(n, 50_000))
        for r0 in range(0, n, chunk):
            sub = matrix[r0:r0 + chunk]
            posrow = cons_in_t[r0:r0 + chunk]
            keys_all: list[np.ndarray] = []
            keys_pos: list[np.ndarray] = []
            for c1 in range(width - 1):
                a = sub[:, c1]
                for c2 in range(c1 + 1, width):
                    b = sub[:, c2]
                    valid = b < f  # rows are ascending, so pads sit at the tail
                    if not valid.any():
                        continue
                    keys_all.append(a[valid] * f + b[valid])
                    vp = valid & posrow
                    if vp.any():
                        keys_pos.append(a[vp] * f + b[vp])
            if keys_all:
                pair_cnt += np.bincount(np.concatenate(keys_all), minlength=f * f)
            if keys_pos:
                pair_pos += np.bincount(np.concatenate(keys_pos), minlength=f * f)
        hits = np.nonzero((pair_cnt >= min_cnt) & (pair_pos >= min_pos))[0]
        return [(int(k) // f, int(k) % f, int(pair_cnt[k]), int(pair_pos[k]))
                for k in hits]
    # huge item universes: exact but slower dictionary counting
    cnt_d: Counter = Counter()
    pos_d: Counter = Counter()
    for row, is_pos in zip(matrix, cons_in_t):
        items = [int(c) for c in row if c < f]
        for pair in combinations(items, 2):
            cnt_d[pair] += 1
            if is_pos:
                pos_d[pair] += 1
    return sorted((a, b, c, pos_d.get((a, b), 0))
                  for (a, b), c in cnt_d.items()
                  if c >= min_cnt and pos_d.get((a, b), 0) >= min_pos)


def mine_rules(db: TransactionDatabase, cfg: MiningConfig) -> list[Pattern]:
    """All patterns satisfying the strict support and confidence thresholds.

    Output is sorted by (length, items); equals ``mine_rules_bruteforce`` on
    every database the oracle accepts.
    """
    if len(db) == 0:
        raise EmptyDatabaseError("cannot mine an empty database")
    n = len(db)
    cons = db.dim if cfg.consequent is None else cfg.consequent
    s_min = Fraction(cfg.supp_min)
    c_min = Fraction(cfg.conf_min)
    min_cnt = _min_count_exceeding(s_min, n)
    min_pos = _min_count_exceeding(s_min * c_min, n)

    lens = np.fromiter((len(t.items) for t in db.transactions), dtype=np.int64, count=n)
    total = int(lens.sum())
    flat = np.empty(total, dtype=np.int64)
    ofs = 0
    for t in db.transactions:
        flat[ofs:ofs + len(t.items)] = t.items
        ofs += len(t.items)
    tids = np.repeat(np.arange(n, dtype=np.int64), lens)

    cons_in_t = np.fromiter((t.class_item == cons for t in db.transactions),
                            dtype=bool, count=n)
    if cons < db.dim and total:  # the consequent may itself be a feature item
        cons_in_t[tids[flat == cons]] = True

    counts = np.bincount(flat, minlength=db.dim) if total else np.zeros(db.dim, np.int64)
    pos_counts = (np.bincount(flat[cons_in_t[tids]], minlength=db.dim)
                  if total else np.zeros(db.dim, np.int64))

    frequent = (counts >= min_cnt) & (pos_counts >= min_pos)
    if cons < db.dim:
        frequent[cons] = False  # antecedents never contain the consequent
    freq_ids = np.nonzero(frequent)[0]

    out: list[Pattern] = []
    category = db.target_category

    def emit(codes: tuple[int, ...], cnt: int, cnt_pos: int):
        if _conf_passes(cnt_pos, cnt, c_min):
            items = tuple(int(freq_ids[c]) for c in codes)
            out.append(Pattern(items, cnt / n, cnt_pos / cnt, category))

    if cfg.min_len <= 1:
        for code, item in enumerate(freq_ids):
            emit((code,), int(counts[item]), int(pos_counts[item]))
    if cfg.max_len == 1 or freq_ids.size < 2:
        out.sort(key=lambda p: (len(p.items), p.items))
        return out

    f = int(freq_ids.size)
    code_of = np.full(db.dim, -1, dtype=np.int64)
    code_of[freq_ids] = np.arange(f)
    codes_all = code_of[flat]
    keep = codes_all >= 0
    codes_k = codes_all[keep]
    tids_k = tids[keep]
    lens_k = np.bincount(tids_k, minlength=n)
    width = int(lens_k.max()) if lens_k.size else 0
    if width < 2:
        out.sort(key=lambda p: (len(p.items), p.items))
        return out

    matrix = np.full((n, width), f, dtype=np.int64)  # pad value f sorts last
    starts = np.zeros(n, dtype=np.int64)
    np.cumsum(lens_k[:-1], out=starts[1:])
    cols = np.arange(codes_k.size, dtype=np.int64) - starts[tids_k]
    matrix[tids_k, cols] = codes_k

    pairs = _frequent_pairs(matrix, cons_in_t, f, min_cnt, min_pos)
    if cfg.min_len <= 2:
        for c1, c2, cnt, cnt_pos in pairs:
            emit((c1, c2), cnt, cnt_pos)

    prev = [(c1, c2) for c1, c2, _, _ in pairs]
    if prev and cfg.max_len >= 3:
        n_words = (n + 63) >> 6
        needed = sorted({c for t in prev for c in t})
        bits: dict[int, np.ndarray] = {}
        order = np.argsort(codes_k, kind="stable")
        codes_sorted = codes_k[order]
        tids_sorted = tids_k[order]
        lo = np.searchsorted(codes_sorted, needed, side="left")
        hi = np.searchsorted(codes_sorted, needed, side="right")
        for i, code in enumerate(needed):
            bits[code] = _make_bitset(tids_sorted[lo[i]:hi[i]], n_words)
        cons_bits = _make_bitset(np.nonzero(cons_in_t)[0].astype(np.int64), n_words)

        k = 3
        while prev and k <= cfg.max_len:
            cur = []
            for cand in _apriori_candidates(prev):
                acc = bits[cand[0]] & bits[cand[1]]
                for c in cand[2:]:
                    acc = acc & bits[c]
                cnt = _popcount(acc)
                if cnt < min_cnt:
                    continue
                cnt_pos = _popcount(acc & cons_bits)
                if cnt_pos < min_pos:
                    continue
                cur.append(cand)
                if k >= cfg.min_len:
                    emit(cand, cnt, cnt_pos)
            prev = cur
            k += 1

    out.sort(key=lambda p: (len(p.items), p.items))
    return out


def mine_rules_bruteforce(db: TransactionDatabase, cfg: MiningConfig) -> list[Pattern]:
    """Exhaustive oracle: enumerate every itemset over items present in ``db``.

    Refuses databases with more than 20 distinct feature items. Applies the
    same strict thresholds and antecedent/consequent disjointness as
    ``mine_rules`` and returns the same canonical order.
    """
    if len(db) == 0:
        raise EmptyDatabaseError("cannot mine an empty database")
    n = len(db)
    cons = db.dim if cfg.consequent is None else cfg.consequent
    present = sorted({i for t in db.transactions for i in t.items} - {cons})
    if len(present) > _BRUTEFORCE_ITEM_LIMIT:
        raise BruteForceScaleError(
            f"{len(present)} distinct items exceed the oracle limit of "
            f"{_BRUTEFORCE_ITEM_LIMIT}")
    bit_of = {item: 1 << b for b, item in enumerate(present)}
    tmasks = np.array(
        [sum(bit_of[i] for i in t.items if i in bit_of) for t in db.transactions],
        dtype=np.int64)
    cons_arr = np.array(
        [t.class_item == cons or (cons in t.items) for t in db.transactions],
        dtype=bool)

    # direct rational transcription of the two strict criteria, kept separate
    # from the optimized miner's integer-threshold machinery
    s_min = Fraction(cfg.supp_min)
    c_min = Fraction(cfg.conf_min)
    out: list[Pattern] = []
    for size in range(cfg.min_len, min(cfg.max_len, len(present)) + 1):
        for combo in combinations(present, size):
            mask = 0
            for i in combo:
                mask |= bit_of[i]
            contained = (tmasks & mask) == mask
            cnt = int(contained.sum())
            if cnt == 0 or Fraction(cnt, n) <= s_min:
                continue
            cnt_pos = int((contained & cons_arr).sum())
            if Fraction(cnt_pos, cnt) > c_min:
                out.append(Pattern(combo, cnt / n, cnt_pos / cnt, db.target_category))
    out.sort(key=lambda p: (len(p.items), p.items))
    return out


def write_patterns(patterns: Iterable[Pattern], destination) -> None:
    """Line-delimited JSON, floats rendered with 17 significant digits."""
    own = isinstance(destination, (str, Path))
    f: TextIO = open(destination, "w") if own else destination
    try:
        for p in patterns:
            items = ", ".join(map(str, p.items))
            f.write(f'{{"category": {p.category}, "items": [{items}], '
                    f'"support": {p.support:.17g}, "confidence": {p.confidence:.17g}}}\n')
    finally:
        if own:
            f.close()


def read_patterns(source) -> list[Pattern]:
    own = isinstance(source, (str, Path))
    f: TextIO = open(source) if own else source
    try:
        out = []
        for line in f:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            out.append(Pattern(tuple(obj["items"]), obj["support"],
                               obj["confidence"], obj["category"]))
        return out
    finally:
        if own:
            f.close()
