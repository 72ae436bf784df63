"""Real-valued CSI features and PCA with energy-based component selection."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel import SceneConfig
from .errors import InsufficientDataError, RangeError, ShapeError
from .estimation import CsiVector

EIGENVALUE_FLOOR = 1e-12
_LOG_FLOOR = 1e-300


class FeatureMap(str, enum.Enum):
    MAGNITUDE = "Magnitude"
    SQUARED_MAGNITUDE = "SquaredMagnitude"
    LOG_MAGNITUDE = "LogMagnitude"


def csi_to_real(csi: CsiVector | np.ndarray, mapping: FeatureMap | str = FeatureMap.MAGNITUDE) -> np.ndarray:
    gains = csi.gains if isinstance(csi, CsiVector) else np.asarray(csi)
    mag = np.abs(gains)
    mapping = FeatureMap(mapping)
    if mapping is FeatureMap.MAGNITUDE:
        return mag
    if mapping is FeatureMap.SQUARED_MAGNITUDE:
        return mag**2
    return np.log(np.maximum(mag, _LOG_FLOOR))


def feature_matrix(csis: Sequence[CsiVector], mapping: FeatureMap | str = FeatureMap.MAGNITUDE) -> np.ndarray:
    if not csis:
        return np.empty((0, 0))
    return np.stack([csi_to_real(c, mapping) for c in csis])


@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray
    eigenvalues: np.ndarray
    # Columns are the principal directions, in eigenvalue order.
    eigenvectors: np.ndarray
    energy_fractions: np.ndarray

    @property
    def n_components(self) -> int:
        return len(self.eigenvalues)

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "eigenvectors": self.eigenvectors.T.tolist(),
            "energy_fractions": self.energy_fractions.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PcaModel":
        return cls(
            mean=np.asarray(data["mean"], dtype=float),
            eigenvalues=np.asarray(data["eigenvalues"], dtype=float),
            eigenvectors=np.asarray(data["eigenvectors"], dtype=float).reshape(len(data["eigenvalues"]), -1).T,
            energy_fractions=np.asarray(data["energy_fractions"], dtype=float),
        )


@dataclass(frozen=True, eq=False)
class FeatureVector:
    scores: np.ndarray
    scene_label: SceneConfig | None = None
    capture_id: int = 0

    @property
    def label(self) -> int:
        return self.scene_label.label


def _as_sample_matrix(features) -> np.ndarray:
    if isinstance(features, np.ndarray):
        x = features
    else:
        rows = [np.asarray(f, dtype=float) for f in features]
        if len({r.shape for r in rows}) > 1:
            raise ShapeError("feature vectors have different lengths")
        x = np.stack(rows) if rows else np.empty((0, 0))
    if x.ndim != 2:
        raise ShapeError(f"expected a 2-D sample matrix, got shape {x.shape}")
    return np.asarray(x, dtype=float)


def fit_pca(features) -> PcaModel:
    """Eigendecomposition of the mean-centred sample covariance.

    Eigenvalues are descending (ties keep their original order), tiny ones are
    clamped to zero, and each eigenvector is signed so its largest-magnitude
    entry is nonnegative.
    """
    x = _as_sample_matrix(features)
    if x.shape[0] < 2:
        raise InsufficientDataError(f"PCA needs at least 2 samples, got {x.shape[0]}")
    mean = x.mean(axis=0)
    centred = x - mean
    cov = centred.T @ centred / (x.shape[0] - 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(-vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    vals = np.where(vals < EIGENVALUE_FLOOR * max(1.0, vals[0]), 0.0, vals)

    pivot = np.argmax(np.abs(vecs), axis=0)
    signs = np.where(vecs[pivot, np.arange(vecs.shape[1])] < 0, -1.0, 1.0)
    vecs = vecs * signs

    total = vals.sum()
    if total <= 0:
        raise InsufficientDataError("samples have zero variance")
    return PcaModel(mean=mean, eigenvalues=vals, eigenvectors=vecs, energy_fractions=vals / total)


def select_components(model: PcaModel, energy_threshold: float) -> int:
    """Smallest d whose cumulative energy fraction reaches the threshold."""
    if not 0 < energy_threshold <= 1:
        raise RangeError(f"energy_threshold must lie in (0, 1], got {energy_threshold}")
    cumulative = np.cumsum(model.energy_fractions)
    # Cumulative sums of fractions can land a few ulps under 1.0.
    hit = np.flatnonzero(cumulative >= energy_threshold - 1e-12)
    nonzero = int(np.count_nonzero(model.eigenvalues))
    return min(int(hit[0]) + 1, nonzero)


def project_matrix(model: PcaModel, x: np.ndarray, d: int) -> np.ndarray:
    if not 1 <= d <= model.n_components:
        raise RangeError(f"d={d} outside [1, {model.n_components}]")
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.mean.shape[0]:
        raise ShapeError(f"feature length {x.shape[-1]} != model dimension {model.mean.shape[0]}")
    return (x - model.mean) @ model.eigenvectors[:, :d]


def project(model: PcaModel, feature, d: int, scene_label: SceneConfig | None = None, capture_id: int = 0) -> FeatureVector:
    scores = project_matrix(model, np.asarray(feature, dtype=float), d)
    return FeatureVector(scores=scores, scene_label=scene_label, capture_id=capture_id)


def reconstruct(model: PcaModel, scores: np.ndarray) -> np.ndarray:
    d = scores.shape[-1]
    return model.mean + scores @ model.eigenvectors[:, :d].T
