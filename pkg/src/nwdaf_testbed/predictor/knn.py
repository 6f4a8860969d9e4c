from __future__ import annotations

import numpy as np


class KNearestNeighbors:
    """Majority vote among the k closest training rows (Euclidean).

    Equidistant neighbours are taken in training order; tied votes go to the
    lexicographically smallest label.
    """

    def __init__(self, k: int = 5, chunk: int = 256) -> None:
        if k < 1:
            raise ValueError("k must be at least 1")
        self.k = k
        self.chunk = chunk

    def fit(self, X: np.ndarray, y) -> KNearestNeighbors:
        self.X_ = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=object)
        if len(self.X_) == 0:
            raise ValueError("empty training set")
        self.classes_ = np.array(sorted(set(y.tolist())), dtype=object)
        self.codes_ = np.searchsorted(self.classes_, y)
        return self

    def predict_with_confidence(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        X = np.asarray(X, dtype=float)
        k = min(self.k, len(self.X_))
        labels = np.empty(len(X), dtype=object)
        conf = np.empty(len(X))
        for start in range(0, len(X), self.chunk):
            block = X[start:start + self.chunk]
            d2 = ((block[:, None, :] - self.X_[None, :, :]) ** 2).sum(axis=2)
            nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
            for r, nbrs in enumerate(nearest):
                votes = np.bincount(self.codes_[nbrs], minlength=len(self.classes_))
                winner = int(np.argmax(votes))
                labels[start + r] = self.classes_[winner]
                conf[start + r] = votes[winner] / k
        return labels, conf

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.predict_with_confidence(X)[0]
