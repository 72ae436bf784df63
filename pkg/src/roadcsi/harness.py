"""End-to-end experiments: synthesis, estimation, PCA, detection, classification.

Seed fan-out: a scene without an explicit seed gets
``SeedSequence(master_seed, spawn_key=(background_id, class_id))``; captures of
a scene use ``SeedSequence(scene_seed, spawn_key=(capture_index, stream))``.
Keys depend on scene identity rather than position, so adding a scene never
changes the data of the others.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, TypeVar

import numpy as np

from . import __version__
from .capture import quantize
from .channel import DEFAULT_CHANNEL_MODEL, ChannelModel, PilotObservation, SceneConfig, Vehicle, generate_dataset
from .classification import N_CLASSES, EvalReport, NnModel, confusion_from_predictions
from .detection import (
    DEFAULT_N_THRESHOLDS,
    DetectorModel,
    ErrorCurve,
    detection_error,
    fit_threshold,
    histogram,
    sweep,
)
from .errors import RoadCsiError, ConfigurationError, StageError
from .estimation import CsiVector, Estimator, estimate_dataset
from .features import FeatureMap, FeatureVector, PcaModel, csi_to_real, fit_pca, project_matrix, select_components
from .grid import GridConfig, build_pilot_grid
from . import tables

log = logging.getLogger(__name__)

# (train, test) images per class, as listed in the published classification table.
PUBLISHED_SPLITS = [
    (200, 250), (500, 500), (500, 750), (500, 1000), (750, 1000), (1000, 1500), (1500, 2000),
    (2000, 2500), (2500, 3000), (3000, 3500), (3500, 4000), (4000, 4500), (4000, 5000),
]
DEFAULT_SWEEP_DS = (1, 2, 3, 5, 10)
DEFAULT_SNR_DB = 30.0
DEFAULT_MASTER_SEED = 20180601

T = TypeVar("T")


def derive_scene_seed(master_seed: int, background_id: int, vehicle: Vehicle | str) -> int:
    vehicle = Vehicle.parse(vehicle)
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(background_id), vehicle.class_id))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridConfig
    scenes: tuple[SceneConfig, ...]
    estimator: Estimator = Estimator.MMSE
    feature_map: FeatureMap = FeatureMap.MAGNITUDE
    energy_threshold: float = 0.999
    d_override: int | None = None
    split: tuple[int, int] = (500, 500)
    master_seed: int = DEFAULT_MASTER_SEED
    channel: ChannelModel = DEFAULT_CHANNEL_MODEL
    # Extra (train, test) pairs reported by the classification experiment.
    report_splits: tuple[tuple[int, int], ...] | None = None
    sweep_ds: tuple[int, ...] = DEFAULT_SWEEP_DS
    n_thresholds: int = DEFAULT_N_THRESHOLDS
    n_bins: int = 30

    def __post_init__(self):
        object.__setattr__(self, "scenes", tuple(self.scenes))
        object.__setattr__(self, "estimator", Estimator(self.estimator))
        object.__setattr__(self, "feature_map", FeatureMap(self.feature_map))
        object.__setattr__(self, "split", tuple(int(v) for v in self.split))
        if self.report_splits is not None:
            object.__setattr__(self, "report_splits", tuple(tuple(int(v) for v in s) for s in self.report_splits))
        object.__setattr__(self, "sweep_ds", tuple(int(d) for d in self.sweep_ds))
        for train, test in self.splits:
            if train < 1 or test < 1:
                raise ConfigurationError(f"train and test counts per class must be >= 1, got ({train}, {test})")
        if not 0 < self.energy_threshold <= 1:
            raise ConfigurationError("energy_threshold must lie in (0, 1]")
        if self.d_override is not None and self.d_override < 1:
            raise ConfigurationError("d_override must be >= 1")
        if not self.scenes:
            raise ConfigurationError("at least one scene is required")

    @property
    def splits(self) -> tuple[tuple[int, int], ...]:
        return self.report_splits or (self.split,)

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "scenes": [s.to_dict() for s in self.scenes],
            "estimator": self.estimator.value,
            "feature_map": self.feature_map.value,
            "energy_threshold": self.energy_threshold,
            "d_override": self.d_override,
            "split": list(self.split),
            "master_seed": int(self.master_seed),
            "channel": self.channel.to_dict(),
            "report_splits": None if self.report_splits is None else [list(s) for s in self.report_splits],
            "sweep_ds": list(self.sweep_ds),
            "n_thresholds": self.n_thresholds,
            "n_bins": self.n_bins,
        }

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    @classmethod
    def from_dict(cls, data: dict, seed_override: int | None = None) -> "ExperimentConfig":
        """Parse a JSON config; scenes without a seed (or all scenes, under an override) get derived seeds."""
        try:
            data = dict(data)
            master = int(seed_override if seed_override is not None else data.get("master_seed", DEFAULT_MASTER_SEED))
            scenes = []
            for raw in data["scenes"]:
                raw = dict(raw)
                if seed_override is not None or raw.get("seed") is None:
                    raw["seed"] = derive_scene_seed(master, raw["background_id"], raw.get("vehicle", "None"))
                scenes.append(SceneConfig.from_dict(raw))
            kwargs = {k: data[k] for k in (
                "estimator", "feature_map", "energy_threshold", "d_override", "split",
                "report_splits", "sweep_ds", "n_thresholds", "n_bins",
            ) if k in data}
            if "channel" in data:
                kwargs["channel"] = ChannelModel(**data["channel"])
            grid = GridConfig.from_dict(data["grid"]) if "grid" in data else GridConfig()
            return cls(grid=grid, scenes=scenes, master_seed=master, **kwargs)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"invalid experiment config: {exc!r}") from None

    @classmethod
    def load(cls, path, seed_override: int | None = None) -> "ExperimentConfig":
        data = tables.read_json(path)
        if "config" in data and "scenes" not in data:  # a run manifest
            data = data["config"]
        return cls.from_dict(data, seed_override)

    def with_seed(self, master_seed: int) -> "ExperimentConfig":
        return ExperimentConfig.from_dict(self.to_dict(), seed_override=master_seed)


def _scenes(pairs, n_captures, master_seed, snr_db=DEFAULT_SNR_DB):
    return [
        SceneConfig(b, v, snr_db, n_captures, derive_scene_seed(master_seed, b, v))
        for v in pairs for b in range(1, 6)
    ]


def default_detection_config(master_seed: int = DEFAULT_MASTER_SEED) -> ExperimentConfig:
    """Five backgrounds, each with and without the sedan, 1000 captures per case."""
    return ExperimentConfig(
        grid=GridConfig(),
        scenes=_scenes([Vehicle.NONE, Vehicle.SEDAN], 1000, master_seed),
        split=(2500, 2500),
        master_seed=master_seed,
    )


def default_classification_config(master_seed: int = DEFAULT_MASTER_SEED) -> ExperimentConfig:
    """Four classes over five backgrounds, 1000 captures per class, split 500/500."""
    return ExperimentConfig(
        grid=GridConfig(),
        scenes=_scenes(list(Vehicle), 200, master_seed),
        split=(500, 500),
        master_seed=master_seed,
    )


def published_classification_config(master_seed: int = DEFAULT_MASTER_SEED) -> ExperimentConfig:
    """Every (train, test) pair of the published table; 9000 captures per class."""
    need = max(a + b for a, b in PUBLISHED_SPLITS)
    return ExperimentConfig(
        grid=GridConfig(),
        scenes=_scenes(list(Vehicle), -(-need // 5), master_seed),
        split=(500, 500),
        report_splits=tuple(PUBLISHED_SPLITS),
        master_seed=master_seed,
    )


def run_stage(name: str, fn: Callable[..., T], *args, **kwargs) -> T:
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except (RoadCsiError, ArithmeticError, ValueError, OSError, np.linalg.LinAlgError) as exc:
        raise StageError(name, exc) from exc


# -- pipeline stages --------------------------------------------------------

def build_dataset(config: ExperimentConfig) -> list[PilotObservation]:
    """Synthesise every scene at the capture file's float32 precision."""
    grid = build_pilot_grid(config.grid)
    return [quantize(o) for o in generate_dataset(list(config.scenes), grid, config.channel)]


def estimate_csi(config: ExperimentConfig, observations: list[PilotObservation]) -> list[CsiVector]:
    return estimate_dataset(observations, config.estimator)


def split_indices(csis: list[CsiVector], labels: np.ndarray, train: int, test: int) -> tuple[np.ndarray, np.ndarray]:
    """Per class, spread ``train`` and ``test`` counts evenly over that class's scenes.

    Inside a scene the earliest captures are used for training, the next ones
    for testing.
    """
    by_scene: dict[tuple[int, SceneConfig], list[int]] = {}
    for i, c in enumerate(csis):
        by_scene.setdefault((int(labels[i]), c.scene_label), []).append(i)
    train_idx, test_idx = [], []
    for cls in sorted(set(int(v) for v in labels)):
        groups = [idx for (lab, _), idx in by_scene.items() if lab == cls]
        m = len(groups)
        for j, idx in enumerate(groups):
            n_tr = train // m + (j < train % m)
            n_te = test // m + (j < test % m)
            if n_tr + n_te > len(idx):
                scene = csis[idx[0]].scene_label
                raise ConfigurationError(
                    f"scene {scene} has {len(idx)} captures but the split needs {n_tr + n_te}"
                )
            train_idx += idx[:n_tr]
            test_idx += idx[n_tr:n_tr + n_te]
    return np.array(sorted(train_idx), dtype=int), np.array(sorted(test_idx), dtype=int)


def real_features(config: ExperimentConfig, csis: list[CsiVector]) -> np.ndarray:
    return np.stack([csi_to_real(c, config.feature_map) for c in csis])


def _feature_vectors(csis, scores) -> list[FeatureVector]:
    return [FeatureVector(scores=s, scene_label=c.scene_label, capture_id=c.capture_id) for c, s in zip(csis, scores)]


def _choose_d(config: ExperimentConfig, pca: PcaModel) -> int:
    if config.d_override is not None:
        if config.d_override > pca.n_components:
            raise ConfigurationError(f"d_override={config.d_override} exceeds {pca.n_components} components")
        return config.d_override
    return select_components(pca, config.energy_threshold)


@dataclass(eq=False)
class DetectionResult:
    pca: PcaModel
    d: int
    detector: DetectorModel
    train_error: float
    test_error: float
    curves: dict[int, ErrorCurve]
    histograms: dict[tuple[int, str], list]
    scatter: list[FeatureVector]
    n_train_per_class: int
    n_test_per_class: int

    @property
    def min_sweep_error_percent(self) -> float:
        return self.curves[self.d].min_error_percent

    def report(self) -> dict:
        return {
            "experiment": "detection",
            "d": self.d,
            "detector": self.detector.to_dict(),
            "train_error": self.train_error,
            "test_error": self.test_error,
            "min_sweep_error_percent": {str(d): c.min_error_percent for d, c in sorted(self.curves.items())},
            "top1_energy_fraction": float(self.pca.energy_fractions[0]),
            "train_per_class": self.n_train_per_class,
            "test_per_class": self.n_test_per_class,
        }


def validate_detection(config: ExperimentConfig) -> None:
    vehicles = {s.vehicle for s in config.scenes}
    if Vehicle.NONE not in vehicles:
        raise ConfigurationError("detection needs at least one background-only scene")
    if vehicles == {Vehicle.NONE}:
        raise ConfigurationError("detection needs at least one vehicle scene")


def detection_analysis(config: ExperimentConfig, csis: list[CsiVector], pca: PcaModel | None = None) -> DetectionResult:
    """Fit PCA and the threshold on the training split, evaluate on the test split."""
    labels = np.array([c.scene_label.vehicle is not Vehicle.NONE for c in csis], dtype=int)
    train, test = config.split
    tr, te = split_indices(csis, labels, train, test)
    x = real_features(config, csis)
    if pca is None:
        pca = fit_pca(x[tr])
    d = _choose_d(config, pca)

    ds = sorted({d, *(k for k in config.sweep_ds if k <= pca.n_components)})
    scores = project_matrix(pca, x, max(ds))
    curves, hists = {}, {}
    detector = train_error = test_error = None
    for k in ds:
        stat = scores[:, :k].mean(axis=1)
        w_tr, wo_tr = stat[tr][labels[tr] == 1], stat[tr][labels[tr] == 0]
        w_te, wo_te = stat[te][labels[te] == 1], stat[te][labels[te] == 0]
        curves[k] = sweep(w_te, wo_te, config.n_thresholds)
        hists[(k, "with_vehicle")] = histogram(w_te, config.n_bins)
        hists[(k, "without_vehicle")] = histogram(wo_te, config.n_bins)
        if k == d:
            detector = fit_threshold(w_tr, wo_tr, d, config.n_thresholds)
            train_error = detector.training_error
            test_error = detection_error(detector, w_te, wo_te)

    return DetectionResult(
        pca=pca, d=d, detector=detector, train_error=train_error, test_error=test_error,
        curves=curves, histograms=hists,
        scatter=_feature_vectors(csis, scores[:, :min(3, scores.shape[1])]),
        n_train_per_class=train, n_test_per_class=test,
    )


@dataclass(eq=False)
class ClassificationResult:
    reports: list[EvalReport]
    pca: PcaModel
    d: int
    scatter: list[FeatureVector] = field(repr=False)

    def report(self) -> dict:
        return {
            "experiment": "classification",
            "d": self.d,
            "top1_energy_fraction": float(self.pca.energy_fractions[0]),
            "reports": [r.to_dict() for r in self.reports],
        }


def validate_classification(config: ExperimentConfig) -> None:
    if len({s.vehicle for s in config.scenes}) < 2:
        raise ConfigurationError("classification needs at least two classes")


def classify_split(config: ExperimentConfig, csis, x, labels, train: int, test: int):
    tr, te = split_indices(csis, labels, train, test)
    pca = fit_pca(x[tr])
    d = _choose_d(config, pca)
    scores = project_matrix(pca, x, d)
    model = NnModel(scores[tr], labels[tr], N_CLASSES)
    cm = confusion_from_predictions(labels[te], model.predict_many(scores[te]), N_CLASSES)
    return EvalReport.from_matrix(cm, train, test), pca, d, scores


def classification_analysis(config: ExperimentConfig, csis: list[CsiVector]) -> ClassificationResult:
    labels = np.array([c.scene_label.label for c in csis], dtype=int)
    x = real_features(config, csis)
    reports = []
    primary = None
    for train, test in config.splits:
        report, pca, d, scores = classify_split(config, csis, x, labels, train, test)
        reports.append(report)
        if primary is None:
            primary = (pca, d, scores)
    pca, d, _ = primary
    scatter_scores = project_matrix(pca, x, min(3, pca.n_components))
    return ClassificationResult(reports=reports, pca=pca, d=d, scatter=_feature_vectors(csis, scatter_scores))


# -- artifacts --------------------------------------------------------------

@dataclass(eq=False)
class RunArtifacts:
    eigen_spectrum: Path
    scatter_2d: Path
    scatter_3d: Path
    eval_report: Path
    manifest: Path
    histograms: Path | None = None
    error_curves: Path | None = None
    table: Path | None = None
    result: DetectionResult | ClassificationResult | None = field(default=None, repr=False)

    def files(self) -> dict[str, Path]:
        names = ("eigen_spectrum", "scatter_2d", "scatter_3d", "histograms", "error_curves", "table", "eval_report")
        return {n: getattr(self, n) for n in names if getattr(self, n) is not None}


def _write_manifest(path: Path, config: ExperimentConfig, experiment: str, files: dict[str, Path]) -> None:
    tables.write_json(path, {
        "experiment": experiment,
        "package_version": __version__,
        "config": config.to_dict(),
        "config_sha256": config.sha256(),
        "master_seed": int(config.master_seed),
        "scene_seeds": [int(s.seed) for s in config.scenes],
        "files": {name: {"path": p.name, "sha256": tables.sha256_file(p)} for name, p in sorted(files.items())},
    })


def _write_common(out: Path, pca: PcaModel, scatter: list[FeatureVector]) -> dict[str, Path]:
    paths = {"eigen_spectrum": out / "eigen_spectrum.csv", "scatter_2d": out / "scatter_2d.csv", "scatter_3d": out / "scatter_3d.csv"}
    tables.write_eigen_spectrum(paths["eigen_spectrum"], pca)
    width = len(scatter[0].scores) if scatter else 0
    tables.write_scatter(paths["scatter_2d"], scatter, min(2, width))
    tables.write_scatter(paths["scatter_3d"], scatter, min(3, width))
    return paths


def write_detection_artifacts(config: ExperimentConfig, result: DetectionResult, out_dir) -> RunArtifacts:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = _write_common(out, result.pca, result.scatter)
    paths["histograms"] = out / "histograms.csv"
    paths["error_curves"] = out / "error_curves.csv"
    paths["eval_report"] = out / "detection_report.json"
    tables.write_histograms(paths["histograms"], result.histograms)
    tables.write_error_curves(paths["error_curves"], result.curves)
    tables.write_json(paths["eval_report"], result.report())
    manifest = out / "manifest.json"
    _write_manifest(manifest, config, "detection", paths)
    return RunArtifacts(manifest=manifest, result=result, **paths)


def write_classification_artifacts(config: ExperimentConfig, result: ClassificationResult, out_dir) -> RunArtifacts:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = _write_common(out, result.pca, result.scatter)
    paths["eval_report"] = out / "eval_report.json"
    paths["table"] = out / "classification_table.csv"
    tables.write_json(paths["eval_report"], result.report())
    tables.write_table(paths["table"], result.reports)
    manifest = out / "manifest.json"
    _write_manifest(manifest, config, "classification", paths)
    return RunArtifacts(manifest=manifest, result=result, **paths)


def compute_csi(config: ExperimentConfig) -> list[CsiVector]:
    observations = run_stage("gen", build_dataset, config)
    return run_stage("estimate", estimate_csi, config, observations)


def run_detection_experiment(config: ExperimentConfig, out_dir) -> RunArtifacts:
    validate_detection(config)
    csis = compute_csi(config)
    result = run_stage("detect", detection_analysis, config, csis)
    log.info("detection: d=%d test error %.4f", result.d, result.test_error)
    return run_stage("report", write_detection_artifacts, config, result, out_dir)


def run_classification_experiment(config: ExperimentConfig, out_dir) -> RunArtifacts:
    validate_classification(config)
    csis = compute_csi(config)
    result = run_stage("classify", classification_analysis, config, csis)
    log.info("classification: d=%d accuracy %s", result.d, [round(r.accuracy, 4) for r in result.reports])
    return run_stage("report", write_classification_artifacts, config, result, out_dir)

