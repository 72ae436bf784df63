"""1-nearest-neighbour vehicle classification (L1 distance) and its metrics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyInputError, LabelError, ShapeError, UndefinedMetricError
from .features import FeatureVector

CLASS_NAMES = ("Background", "TwoWheeler", "Sedan", "Suv")
N_CLASSES = len(CLASS_NAMES)
BACKGROUND = 0

_CHUNK = 256


def l1_distance(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ShapeError(f"cannot compare vectors of shape {a.shape} and {b.shape}")
    return float(np.abs(a - b).sum())


def _check_labels(labels: np.ndarray, n_classes: int) -> None:
    bad = labels[(labels < 0) | (labels >= n_classes)]
    if bad.size:
        raise LabelError(f"label {int(bad[0])} outside the class set [0, {n_classes})")


@dataclass(frozen=True, eq=False)
class NnModel:
    training: np.ndarray
    labels: np.ndarray
    n_classes: int = N_CLASSES

    def __post_init__(self):
        x = np.asarray(self.training, dtype=float)
        y = np.asarray(self.labels, dtype=int)
        if x.ndim != 2 or x.shape[0] == 0:
            raise ShapeError("training set must be a nonempty (n, d) array")
        if y.shape != (x.shape[0],):
            raise ShapeError("one label per training sample is required")
        _check_labels(y, self.n_classes)
        object.__setattr__(self, "training", x)
        object.__setattr__(self, "labels", y)

    @classmethod
    def from_features(cls, features: Sequence[FeatureVector], labels=None, n_classes: int = N_CLASSES) -> "NnModel":
        if not features:
            raise ShapeError("training set is empty")
        if len({len(f.scores) for f in features}) > 1:
            raise ShapeError("training feature vectors have different lengths")
        if labels is None:
            labels = [f.label for f in features]
        return cls(np.stack([f.scores for f in features]), np.asarray(labels), n_classes)

    def nearest(self, x: np.ndarray) -> np.ndarray:
        """Index of the nearest training point for each row of ``x``; ties go to the lowest index."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.training.shape[1]:
            raise ShapeError(f"expected {self.training.shape[1]} scores, got {x.shape[1]}")
        out = np.empty(x.shape[0], dtype=int)
        for start in range(0, x.shape[0], _CHUNK):
            block = x[start:start + _CHUNK]
            dist = np.abs(block[:, None, :] - self.training[None, :, :]).sum(axis=2)
            out[start:start + _CHUNK] = np.argmin(dist, axis=1)
        return out

    def predict_many(self, x: np.ndarray) -> np.ndarray:
        return self.labels[self.nearest(x)]


def predict(model: NnModel, fv: FeatureVector | np.ndarray) -> int:
    scores = fv.scores if isinstance(fv, FeatureVector) else fv
    return int(model.predict_many(np.asarray(scores, dtype=float)[None, :])[0])


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ShapeError("confusion matrix must be square")
        if np.any(c < 0):
            raise ValueError("confusion counts must be nonnegative")
        object.__setattr__(self, "counts", c.astype(np.int64))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_list(self) -> list[list[int]]:
        return self.counts.tolist()


def confusion_from_predictions(true_labels, predicted, n_classes: int = N_CLASSES) -> ConfusionMatrix:
    t = np.asarray(true_labels, dtype=int)
    p = np.asarray(predicted, dtype=int)
    _check_labels(t, n_classes)
    _check_labels(p, n_classes)
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    return ConfusionMatrix(counts)


def confusion(model: NnModel, test: Sequence[FeatureVector], labels=None) -> ConfusionMatrix:
    if len(test) == 0:
        raise EmptyInputError("test set is empty")
    if labels is None:
        labels = [f.label for f in test]
    labels = np.asarray(labels, dtype=int)
    _check_labels(labels, model.n_classes)
    predicted = model.predict_many(np.stack([f.scores for f in test]))
    return confusion_from_predictions(labels, predicted, model.n_classes)


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise EmptyInputError("confusion matrix is empty")
    return float(np.trace(cm.counts)) / cm.total


def far(cm: ConfusionMatrix) -> float:
    """Empty-road samples accepted as any vehicle, over all empty-road samples."""
    row = cm.counts[BACKGROUND]
    attempts = int(row.sum())
    if attempts == 0:
        raise UndefinedMetricError("no empty-road (impostor) samples in the test set")
    return float(attempts - row[BACKGROUND]) / attempts


def frr(cm: ConfusionMatrix) -> float:
    """Vehicle samples rejected as empty road, over all vehicle samples."""
    genuine = cm.counts[BACKGROUND + 1:]
    attempts = int(genuine.sum())
    if attempts == 0:
        raise UndefinedMetricError("no vehicle (genuine) samples in the test set")
    return float(genuine[:, BACKGROUND].sum()) / attempts


def _or_none(metric, cm):
    try:
        return metric(cm)
    except UndefinedMetricError:
        return None


@dataclass(frozen=True, eq=False)
class EvalReport:
    accuracy: float
    far: float | None
    frr: float | None
    matrix: ConfusionMatrix
    train_per_class: int | None = None
    test_per_class: int | None = None

    @classmethod
    def from_matrix(cls, cm: ConfusionMatrix, train_per_class=None, test_per_class=None) -> "EvalReport":
        """Build a report; FAR/FRR are None when the test set lacks impostor or genuine samples."""
        return cls(accuracy(cm), _or_none(far, cm), _or_none(frr, cm), cm, train_per_class, test_per_class)

    def to_dict(self) -> dict:
        return {
            "train_per_class": self.train_per_class,
            "test_per_class": self.test_per_class,
            "accuracy": self.accuracy,
            "far": self.far,
            "frr": self.frr,
            "confusion_matrix": self.matrix.to_list(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EvalReport":
        return cls(
            accuracy=data["accuracy"],
            far=data["far"],
            frr=data["frr"],
            matrix=ConfusionMatrix(np.asarray(data["confusion_matrix"])),
            train_per_class=data.get("train_per_class"),
            test_per_class=data.get("test_per_class"),
        )
