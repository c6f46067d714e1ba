"""Probabilistic classifiers: CART decision tree, bagged random forest, logistic regression.

All three expose the same surface: ``fit`` on a labeled dataset, class
probabilities via ``predict_proba``, and thresholded/argmax labels via
``predict``. They accept any integer label set, including the artificial
label -1 used by the self-learning stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .data import Dataset


@dataclass
class ClassifierSpec:
    """Which classifier to train and with what settings."""

    kind: str = "decision-tree"  # decision-tree | random-forest | logistic-regression
    max_depth: int = 12
    n_estimators: int = 50
    learning_rate: float = 0.1
    n_iterations: int = 500
    bootstrap: bool = True
    seed: int = 42

    def __post_init__(self):
        if self.kind not in ("decision-tree", "random-forest", "logistic-regression"):
            raise ValueError(f"unknown classifier kind {self.kind!r}")
        if self.max_depth < 1 or self.n_estimators < 1 or self.n_iterations < 1:
            raise ValueError("max_depth, n_estimators and n_iterations must be positive")


class TrainedModel:
    """Base class: fitted parameters plus the ordered label set seen at fit time."""

    label_set: np.ndarray  # sorted class identifiers
    n_features_: int

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features_:
            raise ValueError(f"expected {self.n_features_} features, got shape {X.shape}")
        return self._proba(X)

    def _proba(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class _TreeNode:
    __slots__ = ("feature", "threshold", "left", "right", "probs")

    def __init__(self, feature=-1, threshold=0.0, left=None, right=None, probs=None):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.probs = probs  # set on leaves only


def _best_split(X, codes, n_labels, feature_indices):
    """Exhaustive Gini split search over midpoints of sorted unique values.

    Ties in weighted child impurity go to the lower feature index, then the
    lower threshold. Returns (feature, threshold) or None.
    """
    n = len(codes)
    best_impurity = math.inf
    best = None
    for f in feature_indices:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        if xs[0] == xs[-1]:
            continue
        onehot = np.zeros((n, n_labels))
        onehot[np.arange(n), codes[order]] = 1.0
        cum = np.cumsum(onehot, axis=0)
        boundaries = np.flatnonzero(xs[:-1] != xs[1:])
        n_left = boundaries + 1
        n_right = n - n_left
        left = cum[boundaries]
        right = cum[-1] - left
        gini_left = 1.0 - np.sum((left / n_left[:, None]) ** 2, axis=1)
        gini_right = 1.0 - np.sum((right / n_right[:, None]) ** 2, axis=1)
        weighted = (n_left * gini_left + n_right * gini_right) / n
        b = int(np.argmin(weighted))  # first minimum -> lowest threshold
        if weighted[b] < best_impurity:
            best_impurity = weighted[b]
            best = (f, (xs[boundaries[b]] + xs[boundaries[b] + 1]) / 2.0)
    return best


class DecisionTreeModel(TrainedModel):
    """CART with Gini impurity, depth cap as the only regularizer, and
    Laplace-smoothed (+1 per class) leaf frequencies."""

    def __init__(self, max_depth: int = 12, feature_subsample: int | None = None,
                 rng: np.random.Generator | None = None):
        self.max_depth = max_depth
        self.feature_subsample = feature_subsample  # forest members search sqrt(d) features
        self.rng = rng
        self.root_: _TreeNode | None = None

    def fit(self, X: np.ndarray, y: np.ndarray) -> "DecisionTreeModel":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        self.label_set = np.unique(y)
        self.n_features_ = X.shape[1]
        codes = np.searchsorted(self.label_set, y)
        self.root_ = self._grow(X, codes, depth=0)
        return self

    def _grow(self, X, codes, depth):
        n = len(codes)
        n_labels = len(self.label_set)
        counts = np.bincount(codes, minlength=n_labels)
        if depth >= self.max_depth or n < 2 or np.max(counts) == n:
            return self._leaf(counts)
        if self.feature_subsample is not None and self.feature_subsample < X.shape[1]:
            feats = np.sort(self.rng.choice(X.shape[1], size=self.feature_subsample,
                                            replace=False))
        else:
            feats = np.arange(X.shape[1])
        split = _best_split(X, codes, n_labels, feats)
        if split is None:
            return self._leaf(counts)
        f, thr = split
        mask = X[:, f] <= thr
        return _TreeNode(feature=int(f), threshold=float(thr),
                         left=self._grow(X[mask], codes[mask], depth + 1),
                         right=self._grow(X[~mask], codes[~mask], depth + 1))

    def _leaf(self, counts):
        probs = (counts + 1.0) / (counts.sum() + len(counts))
        return _TreeNode(probs=probs)

    def _proba(self, X):
        out = np.empty((X.shape[0], len(self.label_set)))
        self._route(self.root_, X, np.arange(X.shape[0]), out)
        return out

    def _route(self, node, X, idx, out):
        if node.probs is not None:
            out[idx] = node.probs
            return
        mask = X[idx, node.feature] <= node.threshold
        self._route(node.left, X, idx[mask], out)
        self._route(node.right, X, idx[~mask], out)

    def depth(self) -> int:
        def walk(node):
            if node.probs is not None:
                return 0
            return 1 + max(walk(node.left), walk(node.right))
        return walk(self.root_)


class RandomForestModel(TrainedModel):
    """Bagged trees; probabilities are the mean of member-tree rows.

    Per-tree seeds are derived as seed + tree index. With bootstrap disabled
    the bagging and the per-split feature subsampling are both off, so a
    one-tree forest reduces exactly to the single decision tree.
    """

    def __init__(self, max_depth: int = 12, n_estimators: int = 50,
                 bootstrap: bool = True, seed: int = 42):
        self.max_depth = max_depth
        self.n_estimators = n_estimators
        self.bootstrap = bootstrap
        self.seed = seed
        self.trees_: list[DecisionTreeModel] = []

    def fit(self, X: np.ndarray, y: np.ndarray) -> "RandomForestModel":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        self.label_set = np.unique(y)
        self.n_features_ = X.shape[1]
        n, d = X.shape
        subsample = max(1, int(math.floor(math.sqrt(d)))) if self.bootstrap else None
        self.trees_ = []
        for i in range(self.n_estimators):
            rng = np.random.default_rng(self.seed + i)
            if self.bootstrap:
                idx = rng.integers(0, n, size=n)
                Xi, yi = X[idx], y[idx]
            else:
                Xi, yi = X, y
            tree = DecisionTreeModel(max_depth=self.max_depth,
                                     feature_subsample=subsample, rng=rng)
            # bootstrap can lose a class; pin the full label set before growing
            tree.label_set = self.label_set
            tree.n_features_ = d
            tree.root_ = tree._grow(Xi, np.searchsorted(self.label_set, yi), depth=0)
            self.trees_.append(tree)
        return self

    def _proba(self, X):
        return np.mean([t._proba(X) for t in self.trees_], axis=0)


class LogisticRegressionModel(TrainedModel):
    """Full-batch gradient descent on cross-entropy; features standardized
    internally with fit-time mean/stdev. Three or more labels train one-vs-rest
    with row-normalized sigmoid outputs."""

    def __init__(self, learning_rate: float = 0.1, n_iterations: int = 500):
        self.learning_rate = learning_rate
        self.n_iterations = n_iterations
        self.weights_: np.ndarray | None = None  # (n_classes_or_1, d)
        self.biases_: np.ndarray | None = None
        self.loss_history_: list[float] = []

    def fit(self, X: np.ndarray, y: np.ndarray) -> "LogisticRegressionModel":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        self.label_set = np.unique(y)
        self.n_features_ = X.shape[1]
        self.mean_ = X.mean(axis=0)
        std = X.std(axis=0)
        self.std_ = np.where(std > 0, std, 1.0)
        Z = (X - self.mean_) / self.std_

        if len(self.label_set) == 2:
            targets = [(y == self.label_set[1]).astype(float)]
        else:
            targets = [(y == c).astype(float) for c in self.label_set]

        n, d = Z.shape
        t = np.column_stack(targets)
        eps = 1e-12
        self.weights_ = np.zeros((len(targets), d))
        self.biases_ = np.zeros(len(targets))
        self.loss_history_ = []
        for step in range(self.n_iterations + 1):
            p = expit(Z @ self.weights_.T + self.biases_)  # (n, k)
            loss = -np.mean(t * np.log(p + eps) + (1 - t) * np.log(1 - p + eps))
            self.loss_history_.append(float(loss))
            if step == self.n_iterations:
                break
            self.weights_ -= self.learning_rate * ((p - t).T @ Z / n)
            self.biases_ -= self.learning_rate * np.mean(p - t, axis=0)
        return self

    def _proba(self, X):
        Z = (X - self.mean_) / self.std_
        p = expit(Z @ self.weights_.T + self.biases_)
        if len(self.label_set) == 2:
            return np.column_stack([1.0 - p[:, 0], p[:, 0]])
        return p / p.sum(axis=1, keepdims=True)


def _features_of(x) -> np.ndarray:
    if isinstance(x, Dataset):
        return np.asarray(x.features, dtype=float)
    return np.asarray(x, dtype=float)


def fit(spec: ClassifierSpec, train: Dataset) -> TrainedModel:
    """Train the classifier named by ``spec`` on a labeled dataset."""
    if train.labels is None:
        raise ValueError("training dataset must be labeled")
    if train.n_rows == 0:
        raise ValueError("empty training set")
    X = _features_of(train)
    if not np.all(np.isfinite(X)):
        raise ValueError("training features must be finite (run preprocessing first)")
    y = np.asarray(train.labels)
    if len(np.unique(y)) < 2:
        raise ValueError("training set has a single class")

    if spec.kind == "decision-tree":
        return DecisionTreeModel(max_depth=spec.max_depth).fit(X, y)
    if spec.kind == "random-forest":
        return RandomForestModel(max_depth=spec.max_depth, n_estimators=spec.n_estimators,
                                 bootstrap=spec.bootstrap, seed=spec.seed).fit(X, y)
    return LogisticRegressionModel(learning_rate=spec.learning_rate,
                                   n_iterations=spec.n_iterations).fit(X, y)


def predict_proba(m: TrainedModel, x) -> np.ndarray:
    """Class-probability matrix, one row per input row, columns follow m.label_set."""
    return m.predict_proba(_features_of(x))


def predict(m: TrainedModel, x, threshold: float = 0.5) -> np.ndarray:
    """Labels from probabilities.

    Binary {0, 1} models use the inclusive decision rule: predict 1 iff
    p(y=1|x) >= threshold. Any other label set uses argmax with ties going to
    the smaller label id.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must be in [0, 1]")
    proba = predict_proba(m, x)
    labels = np.asarray(m.label_set)
    if len(labels) == 2 and labels[0] == 0 and labels[1] == 1:
        return (proba[:, 1] >= threshold).astype(int)
    return labels[np.argmax(proba, axis=1)]
