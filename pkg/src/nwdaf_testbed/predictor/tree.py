"""CART decision tree with Gini impurity and deterministic tie-breaking."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np


@dataclass
class Node:
    counts: np.ndarray  # per-class sample counts, class order = sorted labels
    feature: int = -1
    threshold: float = 0.0
    left: Optional["Node"] = None
    right: Optional["Node"] = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    @property
    def majority(self) -> int:
        return int(np.argmax(self.counts))  # first maximum = smallest label


def midpoint(a: float, b: float) -> float:
    mid = (a + b) / 2.0
    return a if mid >= b else mid


def _exact_score(left: np.ndarray, right: np.ndarray) -> Fraction:
    # sum_k L_k^2/n_L + sum_k R_k^2/n_R; larger means lower weighted Gini
    nl, nr = int(left.sum()), int(right.sum())
    return Fraction(int((left.astype(object) ** 2).sum()), nl) + Fraction(int((right.astype(object) ** 2).sum()), nr)


class DecisionTreeClassifier:
    """Binary CART tree.

    Splits on ``x <= threshold`` with thresholds at midpoints between
    consecutive distinct values. Among equally good splits the lowest feature
    index wins, then the lowest threshold. Leaves predict the most frequent
    class, ties going to the lexicographically smallest label.
    """

    def __init__(self, max_depth: Optional[int] = None, min_samples_split: int = 2) -> None:
        if max_depth is not None and max_depth < 0:
            raise ValueError("max_depth must be non-negative")
        if min_samples_split < 2:
            raise ValueError("min_samples_split must be at least 2")
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.classes_: np.ndarray = np.array([], dtype=object)
        self.root: Optional[Node] = None

    def fit(self, X: np.ndarray, y) -> DecisionTreeClassifier:
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=object)
        if len(X) == 0:
            raise ValueError("empty training set")
        self.classes_ = np.array(sorted(set(y.tolist())), dtype=object)
        codes = np.searchsorted(self.classes_, y)
        self._X, self._codes = X, codes
        self.root = self._grow(np.arange(len(X)), depth=0)
        del self._X, self._codes
        return self

    def _grow(self, idx: np.ndarray, depth: int) -> Node:
        counts = np.bincount(self._codes[idx], minlength=len(self.classes_))
        node = Node(counts)
        if (
            np.count_nonzero(counts) <= 1
            or len(idx) < self.min_samples_split
            or (self.max_depth is not None and depth >= self.max_depth)
        ):
            return node
        best = self._best_split(idx, counts)
        if best is None:
            return node
        node.feature, node.threshold = best
        go_left = self._X[idx, node.feature] <= node.threshold
        node.left = self._grow(idx[go_left], depth + 1)
        node.right = self._grow(idx[~go_left], depth + 1)
        return node

    def _best_split(self, idx: np.ndarray, total: np.ndarray) -> Optional[tuple[int, float]]:
        n = len(idx)
        k = len(self.classes_)
        onehot = np.eye(k, dtype=np.int64)[self._codes[idx]]
        candidates = []  # (float score, feature, position, left counts, xs)
        best_score = -np.inf
        for j in range(self._X.shape[1]):
            x = self._X[idx, j]
            order = np.argsort(x, kind="stable")
            xs = x[order]
            valid = np.nonzero(xs[1:] > xs[:-1])[0] + 1  # left side = first i samples
            if len(valid) == 0:
                continue
            cum = np.cumsum(onehot[order], axis=0)
            left = cum[valid - 1]
            right = total - left
            nl = valid.astype(float)
            score = (left.astype(float) ** 2).sum(1) / nl + (right.astype(float) ** 2).sum(1) / (n - nl)
            top = score.max()
            if top > best_score:
                best_score = top
            candidates.append((score, j, valid, left, xs))
        if not candidates:
            return None
        # float scores pick a shortlist; exact rational scores settle near-ties
        tol = 1e-9 * max(1.0, abs(best_score))
        best = None
        for score, j, valid, left, xs in candidates:
            for i in np.nonzero(score >= best_score - tol)[0]:
                exact = _exact_score(left[i], total - left[i])
                thr = midpoint(xs[valid[i] - 1], xs[valid[i]])
                key = (exact, -j, -thr)
                if best is None or key > best[0]:
                    best = (key, j, thr)
        return best[1], best[2]

    def _leaf(self, x: np.ndarray) -> Node:
        node = self.root
        while not node.is_leaf:
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node

    def predict_with_confidence(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self.root is None:
            raise RuntimeError("tree is not fitted")
        X = np.asarray(X, dtype=float)
        labels, conf = [], []
        for x in X:
            leaf = self._leaf(x)
            labels.append(self.classes_[leaf.majority])
            conf.append(leaf.counts[leaf.majority] / leaf.counts.sum())
        return np.array(labels, dtype=object), np.array(conf)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.predict_with_confidence(X)[0]

    @property
    def n_leaves(self) -> int:
        def count(node: Node) -> int:
            return 1 if node.is_leaf else count(node.left) + count(node.right)
        return count(self.root) if self.root else 0
