"""Threshold detection of vehicle presence from mean principal-component scores."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyInputError, InsufficientDataError, ShapeError
from .features import FeatureVector

DEFAULT_N_THRESHOLDS = 512


class Polarity(str, enum.Enum):
    LESS_IS_VEHICLE = "LessIsVehicle"
    GREATER_IS_VEHICLE = "GreaterIsVehicle"


@dataclass(frozen=True)
class DetectorModel:
    d: int
    threshold: float
    polarity: Polarity
    training_error: float

    def __post_init__(self):
        if not np.isfinite(self.threshold):
            raise ValueError("threshold must be finite")
        if not 0.0 <= self.training_error <= 1.0:
            raise ValueError("training_error must lie in [0, 1]")
        object.__setattr__(self, "polarity", Polarity(self.polarity))

    def to_dict(self) -> dict:
        return {
            "d": int(self.d),
            "threshold": float(self.threshold),
            "polarity": self.polarity.value,
            "training_error": float(self.training_error),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DetectorModel":
        return cls(**data)


@dataclass(frozen=True, eq=False)
class ErrorCurve:
    thresholds: np.ndarray
    error_percent: np.ndarray
    polarity: Polarity = Polarity.LESS_IS_VEHICLE

    @property
    def min_error_percent(self) -> float:
        return float(self.error_percent.min())


def statistic(fv: FeatureVector | np.ndarray) -> float:
    scores = np.asarray(fv.scores if isinstance(fv, FeatureVector) else fv, dtype=float)
    if scores.size == 0:
        raise EmptyInputError("feature vector has no scores")
    return float(scores.mean())


def _statistics(features: Sequence[FeatureVector] | np.ndarray) -> np.ndarray:
    if isinstance(features, np.ndarray):
        return features.astype(float).reshape(-1)
    return np.array([statistic(f) for f in features], dtype=float)


def is_vehicle(stat, threshold: float, polarity: Polarity) -> np.ndarray:
    """Decision rule; a statistic equal to the threshold counts as vehicle present."""
    stat = np.asarray(stat, dtype=float)
    if Polarity(polarity) is Polarity.LESS_IS_VEHICLE:
        return stat <= threshold
    return stat >= threshold


def error_counts(with_stats: np.ndarray, without_stats: np.ndarray, thresholds: np.ndarray, polarity: Polarity) -> np.ndarray:
    w = np.sort(with_stats)
    wo = np.sort(without_stats)
    t = np.asarray(thresholds, dtype=float)
    if Polarity(polarity) is Polarity.LESS_IS_VEHICLE:
        missed = len(w) - np.searchsorted(w, t, side="right")
        false_alarm = np.searchsorted(wo, t, side="right")
    else:
        missed = np.searchsorted(w, t, side="left")
        false_alarm = len(wo) - np.searchsorted(wo, t, side="left")
    return missed + false_alarm


def _check_classes(with_stats, without_stats):
    if len(with_stats) == 0 or len(without_stats) == 0:
        raise InsufficientDataError("both with-vehicle and without-vehicle samples are required")


def _threshold_grid(with_stats, without_stats, n_thresholds: int) -> np.ndarray:
    if n_thresholds < 1:
        raise ValueError("n_thresholds must be >= 1")
    both = np.concatenate([with_stats, without_stats])
    return np.linspace(both.min(), both.max(), n_thresholds)


def _best_polarity(with_stats, without_stats, thresholds):
    curves = {p: error_counts(with_stats, without_stats, thresholds, p) for p in Polarity}
    # Less-is-vehicle wins ties.
    best = min(Polarity, key=lambda p: (curves[p].min(), p is not Polarity.LESS_IS_VEHICLE))
    return best, curves[best]


def sweep(with_vehicle, without, n_thresholds: int = DEFAULT_N_THRESHOLDS) -> ErrorCurve:
    """Error percentage over evenly spaced thresholds, under the better polarity."""
    w, wo = _statistics(with_vehicle), _statistics(without)
    _check_classes(w, wo)
    thresholds = _threshold_grid(w, wo, n_thresholds)
    polarity, errors = _best_polarity(w, wo, thresholds)
    return ErrorCurve(thresholds=thresholds, error_percent=100.0 * errors / (len(w) + len(wo)), polarity=polarity)


def fit_threshold(with_vehicle, without, d: int, n_thresholds: int = DEFAULT_N_THRESHOLDS) -> DetectorModel:
    w, wo = _statistics(with_vehicle), _statistics(without)
    _check_classes(w, wo)
    thresholds = _threshold_grid(w, wo, n_thresholds)
    polarity, errors = _best_polarity(w, wo, thresholds)
    best = int(np.argmin(errors))  # first minimum = smallest threshold
    return DetectorModel(
        d=d,
        threshold=float(thresholds[best]),
        polarity=polarity,
        training_error=float(errors[best]) / (len(w) + len(wo)),
    )


def detect(model: DetectorModel, fv: FeatureVector | np.ndarray) -> bool:
    scores = fv.scores if isinstance(fv, FeatureVector) else np.asarray(fv)
    if len(scores) != model.d:
        raise ShapeError(f"detector expects {model.d} scores, got {len(scores)}")
    return bool(is_vehicle(statistic(scores), model.threshold, model.polarity))


def detection_error(model: DetectorModel, with_vehicle, without) -> float:
    w, wo = _statistics(with_vehicle), _statistics(without)
    _check_classes(w, wo)
    wrong = np.count_nonzero(~is_vehicle(w, model.threshold, model.polarity))
    wrong += np.count_nonzero(is_vehicle(wo, model.threshold, model.polarity))
    return wrong / (len(w) + len(wo))


def histogram(features, n_bins: int) -> list[tuple[float, float, int]]:
    """Equal-width bins over the statistic range; bins are right-open except the last."""
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    stats = _statistics(features)
    if stats.size == 0:
        raise EmptyInputError("histogram of an empty sample")
    lo, hi = float(stats.min()), float(stats.max())
    if lo == hi:
        edges = np.full(n_bins + 1, lo)
        counts = np.zeros(n_bins, dtype=int)
        counts[0] = stats.size
    else:
        # numpy's histogram already closes only the last bin.
        counts, edges = np.histogram(stats, bins=n_bins, range=(lo, hi))
    return [(float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(n_bins)]
