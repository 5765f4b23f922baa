# smotecls/models/tree.py
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from smotecls.core.errors import DataError
from smotecls.core.rng import RngLike, RngStream, as_generator, child_seed

logger = logging.getLogger("smotecls.tree")


@dataclass(eq=False)
class TreeNode:
    """
    Binary decision node. Rows with x[feature] <= threshold go left.

    Every node keeps the class-count histogram of the rows it saw; leaves
    predict from it.
    """

    counts: np.ndarray
    feature: int = -1
    threshold: float = 0.0
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def n_nodes(self) -> int:
        total, stack = 0, [self]
        while stack:
            node = stack.pop()
            total += 1
            if not node.is_leaf:
                stack.extend((node.left, node.right))
        return total


@dataclass(frozen=True)
class TreeSpec:
    max_depth: Optional[int] = None
    min_leaf: int = 1
    max_features: Optional[int] = None  # None -> all features


@dataclass(eq=False)
class ForestModel:
    trees: List[TreeNode]
    classes: Tuple[int, ...]
    n_features: int
    tree_seeds: List[int] = field(default_factory=list)

    def predict_proba(self, rows: np.ndarray) -> np.ndarray:
        return predict_proba(self, rows)

    def predict(self, rows: np.ndarray) -> np.ndarray:
        p = predict_proba(self, rows)
        return np.asarray(self.classes)[np.argmax(p, axis=1)]


def _gini_children(left: np.ndarray, total: np.ndarray, n: int) -> np.ndarray:
    nl = np.arange(1, n, dtype=np.float64)
    nr = n - nl
    right = total[None, :] - left
    gl = 1.0 - ((left / nl[:, None]) ** 2).sum(axis=1)
    gr = 1.0 - ((right / nr[:, None]) ** 2).sum(axis=1)
    return (nl * gl + nr * gr) / n


def _best_split_on(
    x: np.ndarray, y: np.ndarray, feature: int, n_classes: int, min_leaf: int
) -> Optional[Tuple[float, float]]:
    n = y.shape[0]
    order = np.argsort(x[:, feature], kind="stable")
    xs = x[order, feature]
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y[order]] = 1.0
    csum = np.cumsum(onehot, axis=0)
    left, total = csum[:-1], csum[-1]
    nl = np.arange(1, n)
    valid = (xs[:-1] < xs[1:]) & (nl >= min_leaf) & (n - nl >= min_leaf)
    if not valid.any():
        return None
    score = np.where(valid, _gini_children(left, total, n), np.inf)
    i = int(np.argmin(score))
    thr = xs[i] + (xs[i + 1] - xs[i]) / 2.0
    if not thr < xs[i + 1]:
        thr = xs[i]
    return float(score[i]), float(thr)


def _choose_split(
    x: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    spec: TreeSpec,
    gen: np.random.Generator,
) -> Optional[Tuple[int, float]]:
    d = x.shape[1]
    m = d if spec.max_features is None else max(1, min(spec.max_features, d))
    remaining = gen.permutation(d)
    best: Optional[Tuple[float, int, float]] = None
    # keep drawing feature batches until one of them admits a valid split
    while len(remaining) and best is None:
        batch, remaining = remaining[:m], remaining[m:]
        for f in batch:
            found = _best_split_on(x, y, int(f), n_classes, spec.min_leaf)
            if found is None:
                continue
            score, thr = found
            if best is None or score < best[0]:
                best = (score, int(f), thr)
    if best is None:
        return None
    return best[1], best[2]


def fit_tree(
    x: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    spec: TreeSpec = TreeSpec(),
    rng: RngLike = 0,
) -> TreeNode:
    """
    Greedy Gini tree over integer class codes 0..n_classes-1.

    Growth stops at max depth, at a pure node, or when no split leaves at
    least `min_leaf` rows on both sides.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if x.shape[0] == 0:
        raise DataError("cannot fit a tree on empty input")
    if x.shape[0] < spec.min_leaf:
        raise DataError(f"need at least min_leaf={spec.min_leaf} rows")
    gen = as_generator(rng)

    def counts_of(idx: np.ndarray) -> np.ndarray:
        return np.bincount(y[idx], minlength=n_classes).astype(np.float64)

    all_idx = np.arange(x.shape[0])
    root = TreeNode(counts=counts_of(all_idx))
    stack = [(root, all_idx, 0)]
    while stack:
        node, idx, depth = stack.pop()
        if np.count_nonzero(node.counts) <= 1:
            continue
        if spec.max_depth is not None and depth >= spec.max_depth:
            continue
        if len(idx) < 2 * spec.min_leaf:
            continue
        split = _choose_split(x[idx], y[idx], n_classes, spec, gen)
        if split is None:
            continue
        feature, thr = split
        go_left = x[idx, feature] <= thr
        li, ri = idx[go_left], idx[~go_left]
        node.feature, node.threshold = feature, thr
        node.left = TreeNode(counts=counts_of(li))
        node.right = TreeNode(counts=counts_of(ri))
        stack.append((node.right, ri, depth + 1))
        stack.append((node.left, li, depth + 1))
    return root


def tree_proba(root: TreeNode, rows: np.ndarray) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.float64)
    out = np.empty((rows.shape[0], root.counts.shape[0]))
    stack = [(root, np.arange(rows.shape[0]))]
    while stack:
        node, idx = stack.pop()
        if len(idx) == 0:
            continue
        if node.is_leaf:
            out[idx] = node.counts / node.counts.sum()
            continue
        go_left = rows[idx, node.feature] <= node.threshold
        stack.append((node.left, idx[go_left]))
        stack.append((node.right, idx[~go_left]))
    return out


def fit_forest(
    x: np.ndarray,
    y: np.ndarray,
    n_trees: int = 100,
    spec: Optional[TreeSpec] = None,
    rng: RngLike = 0,
    bootstrap: bool = True,
) -> ForestModel:
    """
    Random forest: each tree on a same-size bootstrap sample, ceil(sqrt(d))
    candidate features per split unless `spec.max_features` says otherwise.
    """
    x = np.asarray(x, dtype=np.float64)
    y_raw = np.asarray(y).astype(np.int64)
    if n_trees < 1:
        raise DataError("n_trees must be >= 1")
    if x.shape[0] == 0:
        raise DataError("cannot fit a forest on empty input")
    classes, y_codes = np.unique(y_raw, return_inverse=True)
    d = x.shape[1]
    if spec is None:
        spec = TreeSpec(max_features=int(math.ceil(math.sqrt(d))))
    gen = as_generator(rng)
    seeds = [child_seed(gen) for _ in range(n_trees)]

    trees: List[TreeNode] = []
    n = x.shape[0]
    for seed in seeds:
        tree_gen = RngStream(seed).generator()
        idx = tree_gen.integers(0, n, size=n) if bootstrap else np.arange(n)
        trees.append(fit_tree(x[idx], y_codes[idx], len(classes), spec, tree_gen))
    logger.debug("FOREST trees=%d classes=%s rows=%d", n_trees, classes.tolist(), n)
    return ForestModel(
        trees=trees,
        classes=tuple(int(c) for c in classes),
        n_features=d,
        tree_seeds=seeds,
    )


def predict_proba(model: ForestModel, rows: np.ndarray) -> np.ndarray:
    """Mean of per-tree leaf class frequencies; columns follow `model.classes`."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != model.n_features:
        raise DataError(
            f"expected {model.n_features} columns, got {rows.shape[1] if rows.ndim == 2 else rows.shape}"
        )
    acc = np.zeros((rows.shape[0], len(model.classes)))
    for tree in model.trees:
        acc += tree_proba(tree, rows)
    acc /= len(model.trees)
    return acc / acc.sum(axis=1, keepdims=True)


def proba_over(model: ForestModel, rows: np.ndarray, n_labels: int) -> np.ndarray:
    """Probabilities over label codes 0..n_labels-1 (zero for classes unseen in training)."""
    p = predict_proba(model, rows)
    out = np.zeros((p.shape[0], n_labels))
    out[:, list(model.classes)] = p
    return out
