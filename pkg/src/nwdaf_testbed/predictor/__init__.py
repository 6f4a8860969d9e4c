from .dataset import CSV_HEADER, FeatureRow, build_dataset, read_dataset_csv, write_dataset_csv
from .encoding import Encoder, SplitSpec, encode, split
from .knn import KNearestNeighbors
from .models import (
    Evaluation,
    Model,
    ModelKind,
    TrainEvalResult,
    UnsupportedModel,
    capabilities,
    evaluate,
    majority_baseline,
    parse_kind,
    predict_next_cell,
    train,
    train_eval,
)
from .tree import DecisionTreeClassifier

__all__ = [
    "CSV_HEADER",
    "DecisionTreeClassifier",
    "Encoder",
    "Evaluation",
    "FeatureRow",
    "KNearestNeighbors",
    "Model",
    "ModelKind",
    "SplitSpec",
    "TrainEvalResult",
    "UnsupportedModel",
    "build_dataset",
    "capabilities",
    "encode",
    "evaluate",
    "majority_baseline",
    "parse_kind",
    "predict_next_cell",
    "read_dataset_csv",
    "split",
    "train",
    "train_eval",
    "write_dataset_csv",
]
