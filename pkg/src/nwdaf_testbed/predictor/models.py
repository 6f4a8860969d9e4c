"""Model training, evaluation and next-cell prediction."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional, Sequence

import numpy as np

from .dataset import FeatureRow
from .encoding import Encoder, SplitSpec, encode, split
from .knn import KNearestNeighbors
from .tree import DecisionTreeClassifier

log = logging.getLogger(__name__)


class ModelKind(str, Enum):
    DECISION_TREE = "DECISION_TREE"
    KNN = "KNN"
    GRADIENT_BOOSTING = "GRADIENT_BOOSTING"
    RANDOM_FOREST = "RANDOM_FOREST"


ALIASES = {
    "dt": ModelKind.DECISION_TREE,
    "knn": ModelKind.KNN,
    "gb": ModelKind.GRADIENT_BOOSTING,
    "rf": ModelKind.RANDOM_FOREST,
}

DEFAULT_HYPERPARAMS: dict[ModelKind, dict[str, Any]] = {
    ModelKind.DECISION_TREE: {"max_depth": None, "min_samples_split": 2},
    ModelKind.KNN: {"k": 5},
    ModelKind.GRADIENT_BOOSTING: {"n_estimators": 100, "max_depth": 9, "learning_rate": 0.05},
    ModelKind.RANDOM_FOREST: {"n_estimators": 100},
}

# accuracies published for the original two-week testbed trace; shown for comparison only
REFERENCE_ACCURACY = {
    ModelKind.GRADIENT_BOOSTING: 0.8065,
    ModelKind.RANDOM_FOREST: 0.8024,
    ModelKind.DECISION_TREE: 0.8011,
    ModelKind.KNN: 0.7903,
}


class UnsupportedModel(Exception):
    pass


def parse_kind(name: str | ModelKind) -> ModelKind:
    if isinstance(name, ModelKind):
        return name
    key = name.strip()
    if key.lower() in ALIASES:
        return ALIASES[key.lower()]
    try:
        return ModelKind(key.upper())
    except ValueError:
        raise ValueError(f"unknown model kind {name!r}") from None


def capabilities() -> set[ModelKind]:
    """Kinds this installation can train; the ensembles need scikit-learn."""
    kinds = {ModelKind.DECISION_TREE, ModelKind.KNN}
    try:
        import sklearn.ensemble  # noqa: F401
    except ImportError:
        return kinds
    return kinds | {ModelKind.GRADIENT_BOOSTING, ModelKind.RANDOM_FOREST}


class _SklearnAdapter:
    def __init__(self, estimator) -> None:
        self.estimator = estimator

    def fit(self, X, y):
        self.estimator.fit(X, np.asarray(y, dtype=str))
        return self

    def predict_with_confidence(self, X):
        proba = self.estimator.predict_proba(X)
        best = np.argmax(proba, axis=1)
        return np.array(self.estimator.classes_[best], dtype=object), proba[np.arange(len(X)), best]


def _make_estimator(kind: ModelKind, params: dict[str, Any], seed: int):
    if kind is ModelKind.DECISION_TREE:
        return DecisionTreeClassifier(params.get("max_depth"), params.get("min_samples_split", 2))
    if kind is ModelKind.KNN:
        return KNearestNeighbors(params.get("k", 5))
    if kind not in capabilities():
        raise UnsupportedModel(f"{kind.value} needs scikit-learn, which is not installed")
    from sklearn.ensemble import GradientBoostingClassifier, RandomForestClassifier

    if kind is ModelKind.GRADIENT_BOOSTING:
        return _SklearnAdapter(GradientBoostingClassifier(random_state=seed, **params))
    return _SklearnAdapter(RandomForestClassifier(random_state=seed, **params))


@dataclass
class Model:
    kind: ModelKind
    hyperparams: dict[str, Any]
    encoder: Encoder
    estimator: Any


def train(
    kind: str | ModelKind,
    train_rows: Sequence[FeatureRow],
    hyperparams: Optional[dict[str, Any]] = None,
    include_supi: bool = True,
    seed: int = 0,
) -> Model:
    kind = parse_kind(kind)
    if not train_rows:
        raise ValueError("training set is empty")
    params = {**DEFAULT_HYPERPARAMS[kind], **(hyperparams or {})}
    X, y, encoder = encode(train_rows, include_supi=include_supi)
    estimator = _make_estimator(kind, params, seed).fit(X, y)
    return Model(kind, params, encoder, estimator)


@dataclass
class Evaluation:
    kind: ModelKind
    hyperparams: dict[str, Any]
    accuracy: float
    labels: list[str]
    confusion: list[list[int]]  # rows: true label, columns: predicted label

    def to_json(self) -> dict:
        return {
            "kind": self.kind.value,
            "hyperparams": self.hyperparams,
            "accuracy": self.accuracy,
            "confusion": {"labels": self.labels, "matrix": self.confusion},
        }


def evaluate(model: Model, test_rows: Sequence[FeatureRow]) -> Evaluation:
    if not test_rows:
        raise ValueError("test set is empty")
    X = model.encoder.transform(test_rows)
    truth = [r.label for r in test_rows]
    pred, _ = model.estimator.predict_with_confidence(X)
    labels = sorted(set(truth) | set(pred.tolist()))
    pos = {lab: i for i, lab in enumerate(labels)}
    confusion = [[0] * len(labels) for _ in labels]
    for t, p in zip(truth, pred):
        confusion[pos[t]][pos[p]] += 1
    correct = sum(int(t == p) for t, p in zip(truth, pred))
    return Evaluation(model.kind, model.hyperparams, correct / len(truth), labels, confusion)


def predict_next_cell(model: Model, context: FeatureRow) -> tuple[str, float]:
    """Most likely handover target for ``context`` (its label field is ignored)."""
    try:
        X = model.encoder.transform([context])
    except (KeyError, TypeError, AttributeError) as exc:
        raise ValueError(f"context cannot be encoded: {exc}") from exc
    labels, conf = model.estimator.predict_with_confidence(X)
    return str(labels[0]), float(conf[0])


def majority_baseline(train_rows: Sequence[FeatureRow], test_rows: Sequence[FeatureRow]) -> tuple[str, float]:
    """Accuracy of always predicting the most common training label (ties: smallest label)."""
    hist = Counter(r.label for r in train_rows)
    top = max(hist.values())
    label = min(lab for lab, c in hist.items() if c == top)
    return label, sum(r.label == label for r in test_rows) / len(test_rows)


@dataclass
class TrainEvalResult:
    n_rows: int
    n_train: int
    n_test: int
    split: SplitSpec
    baseline_label: str
    baseline_accuracy: float
    evaluations: list[Evaluation] = field(default_factory=list)
    unsupported: list[str] = field(default_factory=list)

    def accuracy(self, kind: str | ModelKind) -> float:
        kind = parse_kind(kind)
        return next(e.accuracy for e in self.evaluations if e.kind is kind)

    def to_json(self) -> dict:
        return {
            "n_rows": self.n_rows,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "split": {"train_fraction": self.split.train_fraction, "seed": self.split.seed,
                      "strategy": self.split.strategy},
            "baseline": {"label": self.baseline_label, "accuracy": self.baseline_accuracy},
            "models": [e.to_json() for e in self.evaluations],
            "unsupported": self.unsupported,
            "reference_accuracy": {k.value: v for k, v in REFERENCE_ACCURACY.items()},
        }

    def table(self) -> str:
        lines = [f"{'model':<20}{'accuracy':>10}{'reference':>11}"]
        for e in self.evaluations:
            lines.append(f"{e.kind.value:<20}{e.accuracy:>10.4f}{REFERENCE_ACCURACY[e.kind]:>11.4f}")
        lines.append(f"{'majority baseline':<20}{self.baseline_accuracy:>10.4f}{'':>11}")
        for name in self.unsupported:
            lines.append(f"{name:<20}{'unsupported':>10}")
        return "\n".join(lines)


def train_eval(
    rows: Sequence[FeatureRow],
    kinds: Sequence[str | ModelKind] = (ModelKind.DECISION_TREE, ModelKind.KNN),
    spec: SplitSpec = SplitSpec(),
    hyperparams: Optional[dict[ModelKind, dict[str, Any]]] = None,
    include_supi: bool = True,
) -> TrainEvalResult:
    train_rows, test_rows = split(rows, spec)
    label, base_acc = majority_baseline(train_rows, test_rows)
    result = TrainEvalResult(len(rows), len(train_rows), len(test_rows), spec, label, base_acc)
    for name in kinds:
        kind = parse_kind(name)
        try:
            model = train(kind, train_rows, (hyperparams or {}).get(kind), include_supi, spec.seed)
        except UnsupportedModel as exc:
            log.warning("%s", exc)
            result.unsupported.append(kind.value)
            continue
        result.evaluations.append(evaluate(model, test_rows))
    return result
