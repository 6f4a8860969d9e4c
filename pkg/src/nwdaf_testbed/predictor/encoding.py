"""One-hot / min-max encoding of feature rows, and the train/test split."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import FeatureRow

log = logging.getLogger(__name__)

CATEGORICAL = ("supi", "prev_cell_1", "prev_cell_2", "time_category")
NUMERIC = ("cell_x", "cell_y", "visit_frequency")


@dataclass(frozen=True)
class Encoder:
    """Column layout learned from the training rows; reused unchanged for test rows."""

    vocab: dict[str, tuple[str, ...]]
    lo: dict[str, float]
    hi: dict[str, float]
    include_supi: bool = True

    @classmethod
    def fit(cls, rows: Sequence[FeatureRow], include_supi: bool = True) -> Encoder:
        if not rows:
            raise ValueError("cannot fit an encoder on zero rows")
        vocab = {name: tuple(sorted({getattr(r, name) for r in rows})) for name in cls._categorical(include_supi)}
        lo = {name: min(getattr(r, name) for r in rows) for name in NUMERIC}
        hi = {name: max(getattr(r, name) for r in rows) for name in NUMERIC}
        return cls(vocab, lo, hi, include_supi)

    @staticmethod
    def _categorical(include_supi: bool) -> tuple[str, ...]:
        return CATEGORICAL if include_supi else CATEGORICAL[1:]

    @property
    def columns(self) -> list[str]:
        cols = [f"{name}={v}" for name in self._categorical(self.include_supi) for v in self.vocab[name]]
        return cols + list(NUMERIC)

    def transform(self, rows: Sequence[FeatureRow]) -> np.ndarray:
        cats = self._categorical(self.include_supi)
        index = {name: {v: i for i, v in enumerate(self.vocab[name])} for name in cats}
        offsets, width = {}, 0
        for name in cats:
            offsets[name] = width
            width += len(self.vocab[name])
        X = np.zeros((len(rows), width + len(NUMERIC)))
        unseen = 0
        for r, row in enumerate(rows):
            for name in cats:
                i = index[name].get(getattr(row, name))
                if i is None:
                    unseen += 1
                else:
                    X[r, offsets[name] + i] = 1.0
            for j, name in enumerate(NUMERIC):
                span = self.hi[name] - self.lo[name]
                X[r, width + j] = 0.0 if span == 0 else (getattr(row, name) - self.lo[name]) / span
        if unseen:
            log.info("%d categorical values unseen in training were encoded as zeros", unseen)
        return X


def encode(rows: Sequence[FeatureRow], encoder: Encoder | None = None, include_supi: bool = True):
    """Return ``(X, y, encoder)``; fits a new encoder unless one is given."""
    if not rows:
        raise ValueError("no rows to encode")
    encoder = encoder or Encoder.fit(rows, include_supi)
    y = np.array([r.label for r in rows], dtype=object)
    return encoder.transform(rows), y, encoder


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7
    seed: int = 0
    strategy: str = "random"

    def __post_init__(self) -> None:
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie strictly between 0 and 1")
        if self.strategy not in ("random", "chronological"):
            raise ValueError(f"unknown split strategy {self.strategy!r}")


MIN_ROWS = 10


def split(rows: Sequence[FeatureRow], spec: SplitSpec = SplitSpec()) -> tuple[list[FeatureRow], list[FeatureRow]]:
    """Seeded shuffle (or time order) followed by a prefix cut at round(fraction * n)."""
    n = len(rows)
    if n < MIN_ROWS:
        raise ValueError(f"need at least {MIN_ROWS} rows to split, got {n}")
    if spec.strategy == "random":
        order = np.random.default_rng(spec.seed).permutation(n)
    else:
        order = sorted(range(n), key=lambda i: rows[i].label_time_s)
    n_train = math.floor(spec.train_fraction * n + 0.5)
    shuffled = [rows[i] for i in order]
    return shuffled[:n_train], shuffled[n_train:]
