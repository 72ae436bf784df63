"""Passive vehicle sensing from downlink pilot channel estimates."""

__version__ = "0.1.0"

from .channel import (  # noqa: E402
    ChannelModel,
    PilotObservation,
    SceneConfig,
    Vehicle,
    generate_dataset,
    observe,
    synth_channel,
)
from .classification import ConfusionMatrix, EvalReport, NnModel, accuracy, confusion, far, frr, l1_distance, predict  # noqa: E402
from .detection import DetectorModel, ErrorCurve, Polarity, detect, fit_threshold, histogram, statistic, sweep  # noqa: E402
from .estimation import CsiVector, Estimator, MmsePrior, estimate_dataset, estimate_ls, estimate_mmse  # noqa: E402
from .features import FeatureMap, FeatureVector, PcaModel, csi_to_real, fit_pca, project, select_components  # noqa: E402
from .grid import GridConfig, PilotGrid, build_pilot_grid  # noqa: E402
