"""Command line entry point; every stage reads and writes files so stages compose."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness, tables
from .capture import export_dataset, ingest_captures, read_sidecar
from .channel import Vehicle
from .errors import RoadCsiError, StageError
from .features import PcaModel, fit_pca

DATASET_BIN = "dataset.bin"
DATASET_SIDECAR = "dataset.json"
CSI_CSV = "csi.csv"
PCA_JSON = "pca.json"

_PRESETS = {
    "detection": harness.default_detection_config,
    "classification": harness.published_classification_config,
}


def _config(args, preset: str) -> harness.ExperimentConfig:
    if args.config:
        return harness.ExperimentConfig.load(args.config, seed_override=args.seed)
    config = _PRESETS[preset]()
    return config.with_seed(args.seed) if args.seed is not None else config


def _dirs(args) -> tuple[Path, Path]:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    src = getattr(args, "input", None)
    return (Path(src) if src else out), out


def cmd_gen(args):
    config = _config(args, args.stage or "detection")
    _, out = _dirs(args)
    observations = harness.run_stage("gen", harness.build_dataset, config)
    export_dataset(observations, out / DATASET_BIN, out / DATASET_SIDECAR)
    tables.write_json(out / "config.json", config.to_dict())
    print(f"wrote {len(observations)} observations to {out / DATASET_BIN}")


def cmd_ingest(args):
    _, out = _dirs(args)
    observations = harness.run_stage("ingest", ingest_captures, args.input_file, args.sidecar)
    if observations:
        export_dataset(observations, out / DATASET_BIN, out / DATASET_SIDECAR)
    else:
        sidecar = harness.run_stage("ingest", read_sidecar, args.sidecar)
        export_dataset([], out / DATASET_BIN, out / DATASET_SIDECAR, grid_config=sidecar["grid"])
    print(f"ingested {len(observations)} observations into {out}")


def cmd_estimate(args):
    config = _config(args, args.stage or "detection")
    src, out = _dirs(args)
    observations = harness.run_stage("ingest", ingest_captures, src / DATASET_BIN, src / DATASET_SIDECAR)
    csis = harness.run_stage("estimate", harness.estimate_csi, config, observations)
    tables.write_csi_csv(out / CSI_CSV, csis)
    print(f"wrote {len(csis)} {config.estimator.value} CSI vectors to {out / CSI_CSV}")


def _load_csi(src: Path):
    return harness.run_stage("load", tables.read_csi_csv, src / CSI_CSV)


def cmd_features(args):
    config = _config(args, args.stage or "detection")
    src, out = _dirs(args)
    csis = _load_csi(src)

    def fit():
        if args.stage == "classification":
            labels = np.array([c.scene_label.label for c in csis], dtype=int)
        else:
            labels = np.array([c.scene_label.vehicle is not Vehicle.NONE for c in csis], dtype=int)
        tr, _ = harness.split_indices(csis, labels, *config.split)
        pca = fit_pca(harness.real_features(config, csis)[tr])
        return pca, harness._choose_d(config, pca)

    pca, d = harness.run_stage("features", fit)
    tables.write_pca_json(out / PCA_JSON, pca, selected_d=d)
    tables.write_eigen_spectrum(out / "eigen_spectrum.csv", pca)
    print(f"PCA fitted on the training split; d={d} (energy threshold {config.energy_threshold})")


def cmd_detect(args):
    config = _config(args, "detection")
    src, out = _dirs(args)
    harness.validate_detection(config)
    csis = _load_csi(src)
    pca = PcaModel.from_dict(tables.read_json(src / PCA_JSON)) if (src / PCA_JSON).exists() else None
    result = harness.run_stage("detect", harness.detection_analysis, config, csis, pca)
    arts = harness.run_stage("report", harness.write_detection_artifacts, config, result, out)
    tables.write_json(out / "detector.json", result.detector.to_dict())
    print(f"d={result.d} threshold={result.detector.threshold:.6g} ({result.detector.polarity.value}) "
          f"test error {100 * result.test_error:.2f}%  -> {arts.eval_report}")


def _print_reports(result):
    for r in result.reports:
        far = "n/a" if r.far is None else f"{r.far:.4f}"
        frr = "n/a" if r.frr is None else f"{r.frr:.4f}"
        print(f"{r.train_per_class:>5}/{r.test_per_class:<5} accuracy {100 * r.accuracy:6.2f}%  FRR {frr}  FAR {far}")


def cmd_classify(args):
    config = _config(args, "classification")
    src, out = _dirs(args)
    harness.validate_classification(config)
    csis = _load_csi(src)
    result = harness.run_stage("classify", harness.classification_analysis, config, csis)
    harness.run_stage("report", harness.write_classification_artifacts, config, result, out)
    _print_reports(result)


def cmd_report(args):
    stages = ["detection", "classification"] if args.stage in (None, "all") else [args.stage]
    out = Path(args.out)
    for stage in stages:
        config = _config(args, stage)
        target = out / stage if len(stages) > 1 else out
        if stage == "detection":
            arts = harness.run_detection_experiment(config, target)
            r = arts.result
            print(f"detection: d={r.d} test error {100 * r.test_error:.2f}% "
                  f"min sweep error {r.min_sweep_error_percent:.2f}%  -> {target}")
        else:
            arts = harness.run_classification_experiment(config, target)
            print(f"classification: d={arts.result.d}  -> {target}")
            _print_reports(arts.result)


def cmd_config(args):
    config = _config(args, args.stage or "detection")
    text = json.dumps(config.to_dict(), indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="roadcsi", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_, out_required=True):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="experiment config JSON (or a run manifest)")
        p.add_argument("--seed", type=int, help="override master_seed; re-derives every scene seed")
        p.add_argument("--out", required=out_required, help="output directory")
        p.add_argument("--stage", choices=["detection", "classification", "all"],
                       help="which experiment preset/labels to use")
        p.set_defaults(fn=fn)
        return p

    add("gen", cmd_gen, "synthesise pilot observations to dataset.bin + dataset.json")
    p = add("ingest", cmd_ingest, "validate external pilot captures and normalise them into --out")
    p.add_argument("--input", dest="input_file", required=True, help="binary capture file")
    p.add_argument("--sidecar", required=True, help="JSON sidecar")
    for name, fn, help_ in [
        ("estimate", cmd_estimate, "estimate CSI from dataset.bin into csi.csv"),
        ("features", cmd_features, "fit PCA on csi.csv (training split) into pca.json"),
        ("detect", cmd_detect, "fit and evaluate the threshold detector"),
        ("classify", cmd_classify, "fit and evaluate the nearest-neighbour classifier"),
    ]:
        p = add(name, fn, help_)
        p.add_argument("--input", help="directory holding the previous stage's files (default: --out)")
    add("report", cmd_report, "run full experiments in memory and write every artifact")
    add("config", cmd_config, "print a preset experiment config", out_required=False)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.fn(args)
    except StageError as exc:
        print(f"roadcsi {args.command}: error in stage '{exc.stage}': {exc.cause}", file=sys.stderr)
        return 2
    except (RoadCsiError, OSError) as exc:
        print(f"roadcsi {args.command}: error in stage '{args.command}': {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
