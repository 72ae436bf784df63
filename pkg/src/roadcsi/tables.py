"""CSV and JSON exports for every pipeline artifact.

Floats are written with ``repr`` so a strict reader recovers them exactly.
"""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .channel import SceneConfig
from .classification import EvalReport
from .detection import ErrorCurve
from .estimation import CsiVector, Estimator
from .features import FeatureVector, PcaModel

SCENE_COLUMNS = ["background_id", "vehicle", "snr_db", "n_captures", "seed"]
TABLE_COLUMNS = [
    "train_per_class", "test_per_class", "accuracy_percent", "true_class",
    "pred_0", "pred_1", "pred_2", "pred_3", "frr", "far",
]


def write_json(path, data) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def read_csv_strict(path) -> tuple[list[str], list[list[str]]]:
    """Read a CSV, rejecting rows whose width differs from the header."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            rows.append(row)
    return header, rows


def _scene_cells(scene: SceneConfig | None) -> list:
    if scene is None:
        return ["", "", "", "", ""]
    return [scene.background_id, scene.vehicle.value, float(scene.snr_db), scene.n_captures, scene.seed]


def write_csi_csv(path, csis: Sequence[CsiVector]) -> None:
    width = len(csis[0].gains) if csis else 0
    header = ["capture_id", *SCENE_COLUMNS, "estimator"]
    for k in range(width):
        header += [f"re_{k}", f"im_{k}"]

    def rows():
        for c in csis:
            pairs = np.empty(2 * len(c.gains))
            pairs[0::2] = c.gains.real
            pairs[1::2] = c.gains.imag
            yield [c.capture_id, *_scene_cells(c.scene_label), c.estimator.value, *map(float, pairs)]

    write_csv(path, header, rows())


def read_csi_csv(path) -> list[CsiVector]:
    header, rows = read_csv_strict(path)
    out = []
    for row in rows:
        scene = None
        if row[1] != "":
            scene = SceneConfig(
                background_id=int(row[1]), vehicle=row[2], snr_db=float(row[3]),
                n_captures=int(row[4]), seed=int(row[5]),
            )
        pairs = np.array(row[7:], dtype=float)
        gains = pairs[0::2] + 1j * pairs[1::2]
        gains.setflags(write=False)
        out.append(CsiVector(gains=gains, estimator=Estimator(row[6]), scene_label=scene, capture_id=int(row[0])))
    return out


def write_pca_json(path, model: PcaModel, **extra) -> None:
    write_json(path, {**model.to_dict(), **extra})


def write_eigen_spectrum(path, model: PcaModel) -> None:
    cumulative = np.cumsum(model.energy_fractions)
    write_csv(
        path,
        ["component", "eigenvalue", "energy_fraction", "cumulative_energy"],
        ([i + 1, float(model.eigenvalues[i]), float(model.energy_fractions[i]), float(cumulative[i])]
         for i in range(model.n_components)),
    )


def write_scatter(path, features: Sequence[FeatureVector], d: int) -> None:
    header = ["capture_id", "label", *[f"score{i + 1}" for i in range(d)]]
    write_csv(path, header, ([f.capture_id, f.scene_label.vehicle.value, *map(float, f.scores[:d])] for f in features))


def write_error_curves(path, curves: dict[int, ErrorCurve]) -> None:
    rows = []
    for d, curve in sorted(curves.items()):
        rows += [[d, curve.polarity.value, float(t), float(e)] for t, e in zip(curve.thresholds, curve.error_percent)]
    write_csv(path, ["d", "polarity", "threshold", "error_percent"], rows)


def write_histograms(path, hists: dict[tuple[int, str], list]) -> None:
    rows = []
    for (d, cls), bins in sorted(hists.items()):
        rows += [[d, cls, lo, hi, count] for lo, hi, count in bins]
    write_csv(path, ["d", "class", "bin_low", "bin_high", "count"], rows)


def _fmt(value, digits: int) -> str:
    return "" if value is None else f"{value:.{digits}f}"


def table_rows(report: EvalReport) -> list[list]:
    """Four rows per split in the layout of the published classification table."""
    counts = report.matrix.counts
    return [
        [report.train_per_class, report.test_per_class, _fmt(100 * report.accuracy, 2), i,
         *[int(v) for v in counts[i]], _fmt(report.frr, 4), _fmt(report.far, 4)]
        for i in range(counts.shape[0])
    ]


def write_table(path, reports: Sequence[EvalReport]) -> None:
    n = reports[0].matrix.counts.shape[0] if reports else 4
    header = TABLE_COLUMNS[:4] + [f"pred_{j}" for j in range(n)] + TABLE_COLUMNS[-2:]
    rows = []
    for r in reports:
        rows += table_rows(r)
    write_csv(path, header, rows)


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
