"""Bagged decision-tree ensemble (random forest) for binary classification.

Every random draw flows from splitmix64, a published 64-bit generator chosen so
that trained models reproduce bit-for-bit anywhere the same integer arithmetic
exists:

    state   = (state + 0x9E3779B97F4A7C15) mod 2^64
    z       = (state XOR (state >> 30)) * 0xBF58476D1CE4E5B9 mod 2^64
    z       = (z XOR (z >> 27)) * 0x94D049BB133111EB mod 2^64
    output  = z XOR (z >> 31)

Bounded draws use plain modulo (bias is negligible for the tiny ranges used
here and keeps the sequence portable). Each tree owns an independent stream
seeded from the master seed and the tree index, so parallel training is
bit-identical to sequential training. When row ids are supplied, training rows
are canonicalized by sorting on them, making the model invariant to input row
order.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, TrainingError
from .features import FEATURE_NAMES, FeatureVector

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# Splits must strictly reduce Gini impurity; this guards against fp noise.
_MIN_GAIN = 1e-12


def _mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, index: int) -> int:
    """Deterministic per-stream seed from a master seed and a stream index."""
    return _mix64((master + (index + 1) * _GOLDEN) & _MASK64)


class SplitMix64:
    """Minimal splitmix64 stream; see the module docstring for the algorithm."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return _mix64(self._state)

    def randbelow(self, n: int) -> int:
        return self.next_u64() % n

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def choose(self, k: int, n: int) -> list[int]:
        """k distinct indices out of range(n), returned sorted ascending."""
        pool = list(range(n))
        for i in range(k):
            j = i + self.randbelow(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return sorted(pool[:k])


@dataclass
class ForestConfig:
    tree_count: int = 100
    max_depth: int | None = None
    min_leaf: int = 1
    features_per_split: int = 2  # floor(log2(d)) + 1 for d = 3
    seed: int = 42

    def validate(self, feature_count: int) -> None:
        if self.tree_count < 1:
            raise ConfigurationError("tree_count must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ConfigurationError("max_depth must be >= 1 or None")
        if self.min_leaf < 1:
            raise ConfigurationError("min_leaf must be >= 1")
        if not 1 <= self.features_per_split <= feature_count:
            raise ConfigurationError(
                f"features_per_split must be in [1, {feature_count}], "
                f"got {self.features_per_split}"
            )


@dataclass
class TreeNode:
    """Flat-arena tree node. feature == -1 marks a leaf; children are arena indices.

    count0/count1 are the training-instance class counts reaching the node.
    """

    feature: int
    threshold: float
    left: int
    right: int
    count0: int
    count1: int


@dataclass
class DecisionTree:
    nodes: list[TreeNode] = field(default_factory=list)

    def leaf_fraction(self, x: Sequence[float]) -> float:
        """Positive-class fraction of the leaf that x falls into."""
        node = self.nodes[0]
        while node.feature != -1:
            node = self.nodes[node.left if x[node.feature] <= node.threshold else node.right]
        total = node.count0 + node.count1
        return node.count1 / total if total else 0.0


@dataclass
class ForestModel:
    trees: list[DecisionTree]
    config: ForestConfig
    feature_names: list[str]


def _gini(count0: int, count1: int) -> float:
    n = count0 + count1
    if n == 0:
        return 0.0
    p0, p1 = count0 / n, count1 / n
    return 1.0 - (p0 * p0 + p1 * p1)


def _best_split(X: np.ndarray, y: np.ndarray, feats: list[int], min_leaf: int):
    """Best (gain, feature, threshold) over the sampled features.

    Candidate thresholds are midpoints between consecutive distinct sorted
    values. Ties resolve to the lowest feature index, then lowest threshold:
    features arrive sorted, candidates are scanned in ascending-threshold
    order, and only strictly better gains replace the incumbent.
    """
    n = len(y)
    total1 = int(y.sum())
    total0 = n - total1
    parent = _gini(total0, total1)

    best = None  # (gain, feature, threshold)
    for feat in feats:
        values = X[:, feat]
        order = np.argsort(values, kind="mergesort")
        sv = values[order]
        sy = y[order]
        cuts = np.nonzero(sv[:-1] < sv[1:])[0]
        if cuts.size == 0:
            continue
        left_n = cuts + 1
        right_n = n - left_n
        keep = (left_n >= min_leaf) & (right_n >= min_leaf)
        if not keep.any():
            continue
        cuts, left_n, right_n = cuts[keep], left_n[keep], right_n[keep]
        left1 = np.cumsum(sy)[cuts]
        left0 = left_n - left1
        right1 = total1 - left1
        right0 = right_n - right1
        gini_left = 1.0 - ((left0 / left_n) ** 2 + (left1 / left_n) ** 2)
        gini_right = 1.0 - ((right0 / right_n) ** 2 + (right1 / right_n) ** 2)
        weighted = (left_n * gini_left + right_n * gini_right) / n
        gains = parent - weighted
        pick = int(np.argmax(gains))  # first max: lowest threshold among ties
        gain = float(gains[pick])
        if gain > _MIN_GAIN and (best is None or gain > best[0]):
            cut = cuts[pick]
            best = (gain, feat, float((sv[cut] + sv[cut + 1]) / 2.0))
    return best


def _grow_tree(X: np.ndarray, y: np.ndarray, rng: SplitMix64, config: ForestConfig) -> DecisionTree:
    tree = DecisionTree()

    def grow(index_set: np.ndarray, depth: int) -> int:
        ys = y[index_set]
        count1 = int(ys.sum())
        count0 = len(ys) - count1
        node_id = len(tree.nodes)
        tree.nodes.append(TreeNode(-1, 0.0, -1, -1, count0, count1))

        if count0 == 0 or count1 == 0:
            return node_id
        if config.max_depth is not None and depth >= config.max_depth:
            return node_id
        if len(index_set) < 2 * config.min_leaf:
            return node_id

        feats = rng.choose(config.features_per_split, X.shape[1])
        best = _best_split(X[index_set], ys, feats, config.min_leaf)
        if best is None:
            return node_id

        _, feature, threshold = best
        mask = X[index_set, feature] <= threshold
        node = tree.nodes[node_id]
        node.feature = feature
        node.threshold = threshold
        node.left = grow(index_set[mask], depth + 1)
        node.right = grow(index_set[~mask], depth + 1)
        return node_id

    grow(np.arange(len(y)), 0)
    return tree


def _to_matrix(data, row_ids):
    rows = []
    labels = []
    for features, label in data:
        if isinstance(features, FeatureVector):
            features = features.as_row()
        rows.append([float(v) for v in features])
        labels.append(int(label))
    X = np.asarray(rows, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)

    if np.isnan(X).any():
        bad = int(np.nonzero(np.isnan(X).any(axis=1))[0][0])
        name = row_ids[bad] if row_ids is not None else f"row {bad}"
        raise TrainingError(f"NaN feature value in training data: {name}")
    return X, y


def train(
    data: Sequence[tuple],
    config: ForestConfig,
    row_ids: Sequence | None = None,
    feature_names: Sequence[str] = FEATURE_NAMES,
) -> ForestModel:
    """Train a bagged forest on (feature vector, label) rows.

    Each tree trains on an n-sized bootstrap sample drawn with replacement from
    its own splitmix64 stream (seeded from config.seed and the tree index);
    node splits minimize Gini impurity over features_per_split randomly sampled
    features. Fully deterministic given the seed; supplying row_ids makes the
    model independent of input row order.
    """
    if not data:
        raise TrainingError("training data is empty")
    if row_ids is not None and len(row_ids) != len(data):
        raise ConfigurationError("row_ids length must match data length")

    X, y = _to_matrix(data, row_ids)
    config.validate(X.shape[1])
    if len(set(y.tolist())) < 2:
        raise TrainingError("training data contains a single class")
    if len(feature_names) != X.shape[1]:
        raise ConfigurationError("feature_names length must match feature count")

    if row_ids is not None:
        order = sorted(range(len(data)), key=lambda i: row_ids[i])
        X, y = X[order], y[order]

    n = len(y)
    trees = []
    for tree_index in range(config.tree_count):
        rng = SplitMix64(derive_seed(config.seed, tree_index))
        bootstrap = np.asarray([rng.randbelow(n) for _ in range(n)], dtype=np.int64)
        trees.append(_grow_tree(X[bootstrap], y[bootstrap], rng, config))
    return ForestModel(trees=trees, config=replace(config), feature_names=list(feature_names))


def predict_proba(model: ForestModel, x) -> float:
    """Positive-class probability: mean over trees of the leaf positive fraction."""
    if isinstance(x, FeatureVector):
        x = x.as_row()
    return sum(tree.leaf_fraction(x) for tree in model.trees) / len(model.trees)


def predict(model: ForestModel, x) -> int:
    return 1 if predict_proba(model, x) >= 0.5 else 0


def model_to_dict(model: ForestModel) -> dict:
    """JSON-ready form: config, feature names, and one flat node table per tree."""
    return {
        "config": asdict(model.config),
        "feature_names": list(model.feature_names),
        "trees": [
            [
                [n.feature, n.threshold, n.left, n.right, n.count0, n.count1]
                for n in tree.nodes
            ]
            for tree in model.trees
        ],
    }


def model_from_dict(data: dict) -> ForestModel:
    config = ForestConfig(**data["config"])
    trees = [
        DecisionTree([TreeNode(f, t, l, r, c0, c1) for f, t, l, r, c0, c1 in nodes])
        for nodes in data["trees"]
    ]
    return ForestModel(trees=trees, config=config, feature_names=list(data["feature_names"]))


def save_model(model: ForestModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), sort_keys=True), encoding="utf-8")


def load_model(path: str | Path) -> ForestModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
