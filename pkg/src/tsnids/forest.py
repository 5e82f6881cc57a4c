"""Random forest of Gini CART trees, written against numpy only.

Trees are stored as flat node arrays so they serialize without recursion:
``feature[i] == -1`` marks a leaf, otherwise rows with
``x[feature] <= threshold`` go to ``left[i]`` and the rest to ``right[i]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from .core import RandomSource
from .errors import SchemaError, TrainingError

# Relative slack when comparing split scores; genuinely different scores on
# realistic node sizes differ by far more than this.
_TIE_TOL = 1e-12


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_split: int = 2
    feature_subset_size: int | None = None  # None -> floor(sqrt(n_features))
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be non-negative")
        if self.feature_subset_size is not None and self.feature_subset_size < 1:
            raise ValueError("feature_subset_size must be >= 1")

    def subset_size(self, n_features: int) -> int:
        if self.feature_subset_size is None:
            return max(1, int(np.floor(np.sqrt(n_features))))
        return min(self.feature_subset_size, n_features)


@dataclass
class Tree:
    feature: np.ndarray  # int64, -1 for leaves
    threshold: np.ndarray  # float64
    left: np.ndarray  # int64
    right: np.ndarray  # int64
    counts: np.ndarray  # (n_nodes, n_classes) int64 training counts per node

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def leaf_classes(self) -> np.ndarray:
        return np.argmax(self.counts, axis=1)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Index of the leaf each row lands in."""
        node = np.zeros(x.shape[0], dtype=np.int64)
        rows = np.arange(x.shape[0])
        while True:
            f = self.feature[node]
            active = f >= 0
            if not active.any():
                return node
            r = rows[active]
            n = node[active]
            go_left = x[r, f[active]] <= self.threshold[n]
            node[active] = np.where(go_left, self.left[n], self.right[n])

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.leaf_classes()[self.apply(x)]


@dataclass
class ForestModel:
    trees: list[Tree]
    n_classes: int
    n_features: int
    feature_subset_size: int
    config: ForestConfig = field(default_factory=ForestConfig)


def gini(class_counts) -> float:
    c = np.asarray(class_counts, dtype=np.float64)
    total = c.sum()
    if total <= 0:
        raise ValueError("gini impurity of an empty node is undefined")
    p = c / total
    return float(1.0 - np.sum(p * p))


def _best_split(x, y_onehot, idx, features):
    """Best (feature, threshold, score) over ``features`` for rows ``idx``.

    score = sum(left^2)/n_left + sum(right^2)/n_right; maximizing it minimizes
    the weighted child Gini. Ties go to the lowest feature, then the lowest
    threshold.
    """
    best_f, best_t, best_score = -1, 0.0, -np.inf
    n = idx.shape[0]
    total = y_onehot[idx].sum(axis=0)
    for f in features:
        col = x[idx, f]
        order = np.argsort(col, kind="stable")
        xs = col[order]
        valid = np.flatnonzero(xs[:-1] < xs[1:])
        if valid.size == 0:
            continue
        left = np.cumsum(y_onehot[idx[order]], axis=0)[valid]
        right = total - left
        n_left = (valid + 1).astype(np.float64)
        score = (left * left).sum(axis=1) / n_left + (right * right).sum(axis=1) / (n - n_left)
        s = score.max()
        # earliest threshold whose score is within float noise of the best
        j = int(np.flatnonzero(score >= s - _TIE_TOL * s)[0])
        if best_f < 0 or score[j] > best_score + _TIE_TOL * best_score:
            k = valid[j]
            mid = (xs[k] + xs[k + 1]) / 2.0
            if not mid < xs[k + 1]:  # adjacent floats: the midpoint rounds up
                mid = xs[k]
            best_f, best_t, best_score = int(f), float(mid), float(score[j])
    return best_f, best_t, best_score


def build_tree(
    x: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    rng: np.random.Generator | None = None,
    subset_size: int | None = None,
    max_depth: int | None = None,
    min_samples_split: int = 2,
    sample_idx: np.ndarray | None = None,
) -> Tree:
    """Grow one CART tree depth-first (left subtree before right).

    At every internal node ``subset_size`` features are drawn without
    replacement from ``rng``; with ``subset_size=None`` every feature is
    searched and ``rng`` is not needed. A node becomes a leaf when it is pure,
    hits ``max_depth``, has fewer than ``min_samples_split`` rows or no
    candidate split lowers the weighted Gini.
    """
    n_features = x.shape[1]
    y_onehot = np.zeros((x.shape[0], n_classes), dtype=np.float64)
    y_onehot[np.arange(x.shape[0]), y] = 1.0
    idx0 = np.arange(x.shape[0]) if sample_idx is None else np.asarray(sample_idx)
    m = n_features if subset_size is None else min(subset_size, n_features)

    feature, threshold, left, right, counts = [], [], [], [], []
    stack = [(idx0, 0, -1, False)]  # (rows, depth, parent, is_right)
    while stack:
        idx, depth, parent, is_right = stack.pop()
        node = len(feature)
        if parent >= 0:
            (right if is_right else left)[parent] = node
        c = np.bincount(y[idx], minlength=n_classes)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(c)
        n = idx.shape[0]
        if (
            np.count_nonzero(c) <= 1
            or n < min_samples_split
            or (max_depth is not None and depth >= max_depth)
        ):
            continue
        if m < n_features:
            feats = np.sort(rng.choice(n_features, size=m, replace=False))
        else:
            feats = np.arange(n_features)
        f, t, score = _best_split(x, y_onehot, idx, feats)
        parent_score = float(np.sum(c.astype(np.float64) ** 2)) / n
        if f < 0 or not score > parent_score + _TIE_TOL * parent_score:
            continue
        go_left = x[idx, f] <= t
        feature[node] = f
        threshold[node] = t
        # Pushed right first so the left child is expanded (and numbered) first.
        stack.append((idx[~go_left], depth + 1, node, True))
        stack.append((idx[go_left], depth + 1, node, False))
    return Tree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(counts, dtype=np.int64).reshape(-1, n_classes),
    )


def canonical_order(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row permutation that sorts by (label, features), making training
    independent of the order rows arrive in."""
    keys = [x[:, j] for j in range(x.shape[1] - 1, -1, -1)] + [y]
    return np.lexsort(keys)


def train_forest(x, labels, cfg: ForestConfig = ForestConfig(), n_classes: int | None = None) -> ForestModel:
    x = np.asarray(getattr(x, "values", x), dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise TrainingError("cannot train a forest on an empty matrix")
    if y.shape != (x.shape[0],):
        raise SchemaError(f"{y.shape[0]} labels for {x.shape[0]} rows")
    if y.min() < 0:
        raise SchemaError("class codes must be non-negative")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    elif y.max() >= n_classes:
        raise SchemaError(f"class code {int(y.max())} outside [0, {n_classes})")
    order = canonical_order(x, y)
    x, y = x[order], y[order]
    n = x.shape[0]
    m = cfg.subset_size(x.shape[1])
    root = RandomSource(cfg.seed)
    trees = []
    for t in range(cfg.n_trees):
        gen = root.child(t).generator
        sample = gen.integers(0, n, size=n) if cfg.bootstrap else np.arange(n)
        trees.append(
            build_tree(x, y, n_classes, gen, m, cfg.max_depth, cfg.min_samples_split, np.sort(sample))
        )
    return ForestModel(trees, n_classes, x.shape[1], m, cfg)


def forest_votes(model: ForestModel, x) -> np.ndarray:
    """(n_rows, n_classes) count of trees voting for each class."""
    x = np.asarray(getattr(x, "values", x), dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise SchemaError(f"forest trained on {model.n_features} features, got shape {x.shape}")
    votes = np.zeros((x.shape[0], model.n_classes), dtype=np.int64)
    rows = np.arange(x.shape[0])
    for tree in model.trees:
        np.add.at(votes, (rows, tree.predict(x)), 1)
    return votes


def predict_forest(model: ForestModel, x) -> np.ndarray:
    """Plurality vote; ties resolve to the lowest class code."""
    return np.argmax(forest_votes(model, x), axis=1)


def forest_to_dict(model: ForestModel) -> dict:
    return {
        "n_classes": model.n_classes,
        "n_features": model.n_features,
        "feature_subset_size": model.feature_subset_size,
        "config": asdict(model.config),
    }
