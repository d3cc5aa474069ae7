"""One-vs-rest linear classification over encodings, plus ranking metrics.

The binary learner minimizes ``reg/2 * (||w||^2 + b^2) + mean hinge`` by
deterministic dual coordinate descent with the bias folded in as a constant
augmented feature (so the bias is regularized). Using the mean of the hinge
terms makes the optimum invariant to duplicating the training set.

Average precision follows the all-points interpolation convention: area under
the precision envelope of the descending-score ranking, ties resolved by
stable input order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

DEFAULT_REG_GRID = (0.01, 0.1, 1.0, 10.0)


class UndefinedAPError(ValueError):
    """Average precision needs at least one positive."""


@dataclass(frozen=True)
class LinearModel:
    categories: tuple[int, ...]
    weights: np.ndarray  # (n_categories, dim)
    biases: np.ndarray   # (n_categories,)
    regs: tuple[float, ...]


def hinge_objective(w: np.ndarray, b: float, x: np.ndarray, y: np.ndarray,
                    reg: float) -> float:
    margins = 1.0 - y * (x @ w + b)
    return float(reg / 2.0 * (w @ w + b * b) + np.maximum(margins, 0.0).mean())


def fit_binary(x: np.ndarray, y: np.ndarray, reg: float,
               max_sweeps: int = 1000, tol: float = 1e-10) -> tuple[np.ndarray, float]:
    """Dual coordinate descent on the augmented-bias hinge objective."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.shape[0]
    if n == 0:
        raise ValueError("cannot fit on an empty set")
    xa = np.hstack([x, np.ones((n, 1))])
    c = 1.0 / (reg * n)
    qii = (xa * xa).sum(axis=1)
    alpha = np.zeros(n)
    w = np.zeros(xa.shape[1])
    prev_dual = -np.inf
    for _ in range(max_sweeps):
        max_delta = 0.0
        for i in range(n):
            g = y[i] * (w @ xa[i]) - 1.0
            a_new = min(max(alpha[i] - g / qii[i], 0.0), c)
            delta = a_new - alpha[i]
            if delta != 0.0:
                w += delta * y[i] * xa[i]
                alpha[i] = a_new
                max_delta = max(max_delta, abs(delta))
        # the dual objective rises monotonically, unlike the primal
        dual = reg * (alpha.sum() - 0.5 * (w @ w))
        if max_delta == 0.0 or dual - prev_dual < tol:
            break
        prev_dual = dual
    return w[:-1], float(w[-1])


def _fold_ids(n: int, folds: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    ids = np.empty(n, dtype=np.int64)
    ids[rng.permutation(n)] = np.arange(n) % folds
    return ids


def train_ovr(encodings, labels, reg_grid: Sequence[float] = DEFAULT_REG_GRID,
              folds: int = 5, seed: int = 0) -> LinearModel:
    """One separator per category; regularization picked by CV accuracy."""
    x = np.asarray(encodings, dtype=np.float64)
    lab = np.asarray(labels, dtype=np.int64)
    if x.shape[0] != lab.size:
        raise ValueError("encodings and labels must align")
    if folds < 2:
        raise ValueError("folds must be >= 2")
    categories = tuple(sorted(set(lab.tolist())))
    if len(categories) < 2:
        raise ValueError("need at least two categories")
    fold_of = _fold_ids(x.shape[0], folds, seed)
    weights, biases, regs = [], [], []
    for cat in categories:
        y = np.where(lab == cat, 1.0, -1.0)
        best_reg, best_acc = None, -1.0
        for reg in reg_grid:
            correct = 0
            for fid in range(folds):
                train = fold_of != fid
                w, b = fit_binary(x[train], y[train], reg)
                pred = np.where(x[~train] @ w + b > 0.0, 1.0, -1.0)
                correct += int((pred == y[~train]).sum())
            acc = correct / x.shape[0]
            if acc > best_acc:
                best_reg, best_acc = reg, acc
        w, b = fit_binary(x, y, best_reg)
        weights.append(w)
        biases.append(b)
        regs.append(float(best_reg))
    return LinearModel(categories, np.stack(weights), np.asarray(biases), tuple(regs))


def decision_scores(model: LinearModel, encoding) -> np.ndarray:
    x = np.asarray(encoding, dtype=np.float64)
    if x.size != model.weights.shape[1]:
        raise ValueError("encoding length does not match the model")
    return model.weights @ x + model.biases


def predict(model: LinearModel, encoding) -> int:
    scores = decision_scores(model, encoding)
    return model.categories[int(np.argmax(scores))]  # argmax takes the lowest id on ties


def average_precision(scores, positives) -> float:
    """All-points interpolated AP over the descending-score ranking."""
    s = np.asarray(scores, dtype=np.float64)
    pos = np.asarray(positives, dtype=bool)
    if s.size != pos.size or s.size == 0:
        raise ValueError("scores and positives must align and be non-empty")
    n_pos = int(pos.sum())
    if n_pos == 0:
        raise UndefinedAPError("no positives to rank")
    order = np.argsort(-s, kind="stable")
    hits = pos[order]
    tp = np.cumsum(hits)
    precision = tp / np.arange(1, s.size + 1)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    return float(envelope[hits].sum() / n_pos)


def mean_average_precision(score_matrix, labels, categories: Sequence[int]) -> tuple[float, list[float]]:
    """mAP over one-vs-rest rankings; score_matrix is (n_samples, n_categories)."""
    s = np.asarray(score_matrix, dtype=np.float64)
    lab = np.asarray(labels)
    per_category = [average_precision(s[:, j], lab == cat)
                    for j, cat in enumerate(categories)]
    return float(np.mean(per_category)), per_category


def accuracy(model: LinearModel, encodings, labels) -> float:
    lab = np.asarray(labels)
    preds = np.array([predict(model, e) for e in np.asarray(encodings, dtype=np.float64)])
    return float((preds == lab).mean())


def save_model(model: LinearModel, destination) -> None:
    obj = {
        "dim": int(model.weights.shape[1]),
        "categories": list(model.categories),
        "weights": [w.tolist() for w in model.weights],
        "biases": model.biases.tolist(),
        "regs": list(model.regs),
    }
    own = isinstance(destination, (str, Path))
    f = open(destination, "w") if own else destination
    try:
        json.dump(obj, f)
    finally:
        if own:
            f.close()


def load_model(source) -> LinearModel:
    own = isinstance(source, (str, Path))
    f = open(source) if own else source
    try:
        obj = json.load(f)
    finally:
        if own:
            f.close()
    return LinearModel(tuple(obj["categories"]), np.asarray(obj["weights"], dtype=np.float64),
                       np.asarray(obj["biases"], dtype=np.float64), tuple(obj["regs"]))
