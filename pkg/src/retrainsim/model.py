"""Random forest with Gini splits, randomized hyperparameter search, ROC AUC."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Sequence, Union

import numpy as np
from scipy.stats import rankdata
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .dataset import LabeledBatch, as_feature_matrix
from .exceptions import (
    EmptyClassError,
    SchemaError,
    StratificationError,
    UndefinedMetricError,
    ValidationError,
)

logger = logging.getLogger(__name__)

MaxFeatures = Union[int, str]
_SYMBOLIC_MAX_FEATURES = ("sqrt", "half", "all")


def resolve_max_features(max_features: MaxFeatures, n_features: int) -> int:
    if max_features == "sqrt":
        k = math.isqrt(n_features) if n_features > 0 else 1
    elif max_features == "half":
        k = n_features // 2
    elif max_features == "all" or max_features is None:
        k = n_features
    elif isinstance(max_features, (int, np.integer)):
        k = int(max_features)
        if not 1 <= k <= n_features:
            raise ValidationError(f"max_features={k} outside [1, {n_features}]")
    else:
        raise ValidationError(f"unknown max_features {max_features!r}")
    return max(1, min(k, n_features))


@dataclass(frozen=True)
class ForestHyperparams:
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_leaf: int = 1
    max_features: MaxFeatures = "sqrt"
    bootstrap_fraction: float = 1.0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValidationError("n_trees must be >= 1")
        if self.min_samples_leaf < 1:
            raise ValidationError("min_samples_leaf must be >= 1")
        if not 0.0 < self.bootstrap_fraction <= 1.0:
            raise ValidationError("bootstrap_fraction must be in (0, 1]")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValidationError("max_depth must be >= 0 or None")
        if isinstance(self.max_features, str) and self.max_features not in _SYMBOLIC_MAX_FEATURES:
            raise ValidationError(f"unknown max_features {self.max_features!r}")
        if isinstance(self.max_features, (int, np.integer)) and self.max_features < 1:
            raise ValidationError("max_features must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


# ------------------------------------------------------------------------ trees


@dataclass
class Tree:
    """Array-encoded binary tree. Rows with ``x[feature] <= threshold`` go left.

    Leaves have ``feature == -1``; ``value`` holds the positive-class
    frequency of the training rows that reached each node.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    impurity_decrease: np.ndarray

    @classmethod
    def leaf(cls, value: float, n_samples: int = 0) -> "Tree":
        return cls(
            np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]),
            np.array([float(value)]), np.array([n_samples]), np.array([0.0]),
        )

    @classmethod
    def stump(cls, feature: int, threshold: float, left_value: float, right_value: float) -> "Tree":
        return cls(
            np.array([feature, -1, -1]),
            np.array([threshold, 0.0, 0.0]),
            np.array([1, -1, -1]),
            np.array([2, -1, -1]),
            np.array([(left_value + right_value) / 2, left_value, right_value]),
            np.array([0, 0, 0]),
            np.array([0.0, 0.0, 0.0]),
        )

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_splits(self) -> int:
        return int((self.feature >= 0).sum())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        node = np.zeros(X.shape[0], dtype=np.intp)
        rows = np.arange(X.shape[0])
        while rows.size:
            f = self.feature[node[rows]]
            internal = f >= 0
            rows, f = rows[internal], f[internal]
            if not rows.size:
                break
            cur = node[rows]
            go_left = X[rows, f] <= self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


def _gini_weighted(n_pos, n):
    # n * gini(node) = n - (p^2 + q^2) / n
    return n - (n_pos ** 2 + (n - n_pos) ** 2) / n


def _best_split(Xs, yn, feats, min_leaf):
    """Best (feature, threshold, position) on node rows, or None.

    Scans features in ascending index order and thresholds in ascending
    order; the first maximum wins, so ties go to the lowest feature index
    and then the lowest threshold.
    """
    n = yn.size
    order = np.argsort(Xs, axis=0, kind="stable")
    xs = np.take_along_axis(Xs, order, axis=0)
    ys = yn[order]
    left_pos = np.cumsum(ys, axis=0, dtype=np.float64)[:-1]
    n_left = np.arange(1, n, dtype=np.float64)[:, None]
    n_right = n - n_left
    right_pos = float(yn.sum()) - left_pos
    score = (left_pos ** 2 + (n_left - left_pos) ** 2) / n_left + (
        right_pos ** 2 + (n_right - right_pos) ** 2
    ) / n_right
    valid = xs[1:] > xs[:-1]
    if min_leaf > 1:
        valid[: min_leaf - 1] = False
        valid[n - min_leaf:] = False
    if not valid.any():
        return None
    score = np.where(valid, score, -np.inf)
    flat = score.T.ravel()
    best = int(np.argmax(flat))
    j, i = divmod(best, n - 1)
    lo, hi = xs[i, j], xs[i + 1, j]
    thr = lo + (hi - lo) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return int(feats[j]), float(thr)


def fit_tree(
    X: np.ndarray,
    y: np.ndarray,
    *,
    max_depth: int | None,
    min_samples_leaf: int,
    max_features: int,
    rng: np.random.Generator,
) -> Tree:
    n_features = X.shape[1]
    feature, threshold, left, right, value, n_samples, decrease = [], [], [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[idx].mean()) if idx.size else 0.0)
        n_samples.append(int(idx.size))
        decrease.append(0.0)
        return len(feature) - 1

    root = new_node(np.arange(y.size))
    stack = [(root, np.arange(y.size), 0)]
    while stack:
        node, idx, depth = stack.pop()
        n = idx.size
        n_pos = float(y[idx].sum())
        if (
            n < 2 * min_samples_leaf
            or n_pos == 0
            or n_pos == n
            or (max_depth is not None and depth >= max_depth)
        ):
            continue
        if max_features < n_features:
            feats = np.sort(rng.choice(n_features, size=max_features, replace=False))
        else:
            feats = np.arange(n_features)
        split = _best_split(X[np.ix_(idx, feats)], y[idx], feats, min_samples_leaf)
        if split is None:
            continue
        f, thr = split
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node], threshold[node] = f, thr
        decrease[node] = _gini_weighted(n_pos, n) - _gini_weighted(
            float(y[li].sum()), li.size
        ) - _gini_weighted(float(y[ri].sum()), ri.size)
        left[node] = new_node(li)
        right[node] = new_node(ri)
        # right pushed first so the left subtree is expanded first
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))

    return Tree(
        np.array(feature, dtype=np.intp),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.intp),
        np.array(right, dtype=np.intp),
        np.array(value, dtype=np.float64),
        np.array(n_samples, dtype=np.intp),
        np.maximum(np.array(decrease, dtype=np.float64), 0.0),
    )


# ----------------------------------------------------------------------- forest


class RandomForest(ClassifierMixin, BaseEstimator):
    """Bagged Gini trees. Deterministic given ``random_state``.

    Tree ``t`` draws its bootstrap and feature subsets from the RNG stream
    seeded by ``(random_state, t)``.
    """

    def __init__(
        self,
        n_trees: int = 100,
        max_depth: int | None = None,
        min_samples_leaf: int = 1,
        max_features: MaxFeatures = "sqrt",
        bootstrap_fraction: float = 1.0,
        random_state: int = 0,
    ):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.bootstrap_fraction = bootstrap_fraction
        self.random_state = random_state

    @property
    def hyperparams(self) -> ForestHyperparams:
        return ForestHyperparams(
            self.n_trees, self.max_depth, self.min_samples_leaf,
            self.max_features, self.bootstrap_fraction,
        )

    def fit(self, X, y):
        hp = self.hyperparams
        X = as_feature_matrix(X)
        y = np.asarray(y).astype(np.int8)
        if y.shape != (X.shape[0],):
            raise SchemaError("labels do not match feature rows")
        if y.size == 0 or y.min() == y.max():
            raise EmptyClassError("training data must contain both classes")
        n, d = X.shape
        k = resolve_max_features(hp.max_features, d)
        n_boot = max(1, int(round(hp.bootstrap_fraction * n)))
        trees = []
        for t in range(hp.n_trees):
            rng = np.random.default_rng([int(self.random_state), t])
            boot = rng.integers(0, n, size=n_boot)
            trees.append(
                fit_tree(
                    X[boot], y[boot],
                    max_depth=hp.max_depth,
                    min_samples_leaf=hp.min_samples_leaf,
                    max_features=k,
                    rng=rng,
                )
            )
        self.trees_ = trees
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = d
        self.train_size_ = n
        self.feature_importances_ = _importances(trees, d)
        return self

    @classmethod
    def from_trees(cls, trees: Sequence[Tree], n_features: int, **params) -> "RandomForest":
        """Wrap hand-built trees, e.g. for testing prediction semantics."""
        forest = cls(n_trees=len(trees), **params)
        forest.trees_ = list(trees)
        forest.classes_ = np.array([0, 1])
        forest.n_features_in_ = n_features
        forest.train_size_ = 0
        forest.feature_importances_ = _importances(forest.trees_, n_features)
        return forest

    def tree_predictions(self, X) -> np.ndarray:
        check_is_fitted(self, "trees_")
        X = as_feature_matrix(X, self.n_features_in_)
        return np.stack([t.predict(X) for t in self.trees_]) if X.shape[0] else np.empty((len(self.trees_), 0))

    def predict_proba(self, X):
        p = self.tree_predictions(X).mean(axis=0)
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] > 0.5).astype(np.int8)


def _importances(trees: Sequence[Tree], n_features: int) -> np.ndarray:
    total = np.zeros(n_features)
    for t in trees:
        internal = t.feature >= 0
        np.add.at(total, t.feature[internal], t.impurity_decrease[internal])
    s = total.sum()
    return total / s if s > 0 else total


TrainedForest = RandomForest


def train_forest(train: LabeledBatch, hp: ForestHyperparams, seed: int) -> RandomForest:
    return RandomForest(random_state=seed, **hp.to_dict()).fit(train.X, train.y)


def predict_proba(model: RandomForest, data) -> np.ndarray:
    """Positive-class probability per row."""
    check_is_fitted(model, "trees_")
    data = as_feature_matrix(data, model.n_features_in_)
    return model.predict_proba(data)[:, 1]


def gini_importances(model: RandomForest) -> np.ndarray:
    check_is_fitted(model, "feature_importances_")
    return model.feature_importances_.copy()


# ----------------------------------------------------------------------- metric


def roc_auc(scores, labels) -> float:
    """Mann-Whitney form: P(s_pos > s_neg) + 0.5 P(s_pos == s_neg)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise SchemaError("scores and labels must be 1-D with equal length")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("ROC AUC needs both classes")
    ranks = rankdata(scores, method="average")
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


# ----------------------------------------------------------------------- search


@dataclass(frozen=True)
class SearchSpace:
    n_trees: tuple = (50, 100, 200)
    max_depth: tuple = (4, 8, 16, None)
    min_samples_leaf: tuple = (1, 2, 5)
    max_features: tuple = ("sqrt", "half", "all")
    bootstrap_fraction: tuple = (1.0,)
    n_candidates: int = 10
    holdout_fraction: float = 0.2

    def __post_init__(self):
        if self.n_candidates < 1:
            raise ValidationError("n_candidates must be >= 1")
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ValidationError("holdout_fraction must be in (0, 1)")
        for name in self.dimensions:
            values = tuple(getattr(self, name))
            if not values:
                raise ValidationError(f"search dimension {name} is empty")
            object.__setattr__(self, name, values)

    @property
    def dimensions(self) -> tuple[str, ...]:
        return ("n_trees", "max_depth", "min_samples_leaf", "max_features", "bootstrap_fraction")

    def sample(self, rng: np.random.Generator) -> ForestHyperparams:
        picks = {}
        for name in self.dimensions:
            values = getattr(self, name)
            picks[name] = values[int(rng.integers(len(values)))]
        return ForestHyperparams(**picks)

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


def stratified_holdout(y: np.ndarray, fraction: float, rng: np.random.Generator):
    """(train_idx, holdout_idx) with each class split at ``fraction``."""
    train, hold = [], []
    for cls in (0, 1):
        idx = rng.permutation(np.flatnonzero(y == cls))
        k = int(round(fraction * idx.size))
        k = min(max(k, 1), idx.size - 1) if idx.size >= 2 else k
        hold.append(idx[:k])
        train.append(idx[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(hold))


def randomized_search(
    train: LabeledBatch, space: SearchSpace, seed: int
) -> tuple[ForestHyperparams, int]:
    """Score sampled configurations by holdout ROC AUC; earliest wins ties."""
    y = train.y
    if min(int((y == 0).sum()), int((y == 1).sum())) < 2:
        raise EmptyClassError("randomized search needs >= 2 samples of each class")
    rng = np.random.default_rng([int(seed), 0x5EA])
    candidates = [space.sample(rng) for _ in range(space.n_candidates)]
    for _attempt in range(6):
        tr, ho = stratified_holdout(y, space.holdout_fraction, rng)
        if len(np.unique(y[tr])) == 2 and len(np.unique(y[ho])) == 2:
            break
    else:
        raise StratificationError("holdout split kept leaving a single-class partition")
    if len(candidates) == 1:
        return candidates[0], 1

    best, best_score = None, -np.inf
    for hp in candidates:
        model = RandomForest(random_state=seed, **hp.to_dict()).fit(train.X[tr], y[tr])
        score = roc_auc(model.predict_proba(train.X[ho])[:, 1], y[ho])
        logger.debug("candidate %s auc=%.4f", hp, score)
        if score > best_score:
            best, best_score = hp, score
    return best, len(candidates)
