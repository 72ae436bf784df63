import json
import subprocess
import sys

import pytest

from roadcsi import harness, tables
from roadcsi.cli import main
from roadcsi.grid import GridConfig


@pytest.fixture
def config_file(tmp_path):
    data = {
        "grid": GridConfig(n_subcarriers=60, pilot_spacing=6, n_pilot_symbols_per_capture=4, seed=0).to_dict(),
        "scenes": [
            {"background_id": b, "vehicle": v, "snr_db": 30.0, "n_captures": 20}
            for v in ("None", "TwoWheeler", "Sedan", "Suv") for b in range(1, 6)
        ],
        "split": [40, 40],
        "master_seed": 3,
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(data))
    return path


def run(*argv):
    return main([str(a) for a in argv])


def test_stage_chain_matches_in_memory(tmp_path, config_file, capsys):
    out = tmp_path / "run"
    assert run("gen", "--config", config_file, "--out", out) == 0
    assert run("estimate", "--config", config_file, "--out", out, "--stage", "classification") == 0
    assert run("features", "--config", config_file, "--out", out, "--stage", "classification") == 0
    capsys.readouterr()
    assert run("classify", "--config", config_file, "--input", out, "--out", out / "cls") == 0
    printed = capsys.readouterr().out
    assert "accuracy" in printed

    cfg = harness.ExperimentConfig.load(config_file)
    mem = harness.run_classification_experiment(cfg, tmp_path / "mem")
    assert (out / "cls" / "eval_report.json").read_bytes() == mem.eval_report.read_bytes()
    assert (out / "cls" / "classification_table.csv").read_bytes() == mem.table.read_bytes()

    pca = tables.read_json(out / "pca.json")
    assert pca["selected_d"] == mem.result.d


def test_detect_chain(tmp_path, config_file):
    cfg = tables.read_json(config_file)
    cfg["scenes"] = [s for s in cfg["scenes"] if s["vehicle"] in ("None", "Sedan")]
    cfg["split"] = [50, 50]
    config_file.write_text(json.dumps(cfg))
    out = tmp_path / "run"
    assert run("gen", "--config", config_file, "--out", out) == 0
    assert run("estimate", "--config", config_file, "--out", out) == 0
    assert run("features", "--config", config_file, "--out", out) == 0
    assert run("detect", "--config", config_file, "--out", out) == 0
    report = tables.read_json(out / "detection_report.json")
    assert report["test_error"] <= 0.1
    assert tables.read_json(out / "detector.json")["d"] == report["d"]


def test_ingest_normalises(tmp_path, config_file):
    src = tmp_path / "src"
    assert run("gen", "--config", config_file, "--out", src) == 0
    dst = tmp_path / "dst"
    assert run("ingest", "--input", src / "dataset.bin", "--sidecar", src / "dataset.json", "--out", dst) == 0
    assert (dst / "dataset.bin").read_bytes() == (src / "dataset.bin").read_bytes()
    assert (dst / "dataset.json").read_bytes() == (src / "dataset.json").read_bytes()


def test_ingest_truncated_fails_with_stage(tmp_path, config_file, capsys):
    src = tmp_path / "src"
    run("gen", "--config", config_file, "--out", src)
    data = (src / "dataset.bin").read_bytes()
    (src / "dataset.bin").write_bytes(data[:-8])
    code = run("ingest", "--input", src / "dataset.bin", "--sidecar", src / "dataset.json", "--out", tmp_path / "d")
    assert code != 0
    assert "stage 'ingest'" in capsys.readouterr().err


def test_detect_rejects_single_class(tmp_path, config_file, capsys):
    cfg = tables.read_json(config_file)
    cfg["scenes"] = [s for s in cfg["scenes"] if s["vehicle"] == "None"]
    config_file.write_text(json.dumps(cfg))
    assert run("detect", "--config", config_file, "--out", tmp_path) != 0
    assert "error" in capsys.readouterr().err


def test_missing_input_file(tmp_path, config_file, capsys):
    assert run("estimate", "--config", config_file, "--out", tmp_path / "empty") != 0
    assert "stage 'ingest'" in capsys.readouterr().err


def test_seed_flag_overrides(tmp_path, config_file, capsys):
    assert run("config", "--config", config_file, "--seed", "77") == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["master_seed"] == 77
    assert doc["scenes"][0]["seed"] == harness.derive_scene_seed(77, 1, "None")


def test_report_is_reproducible_from_manifest(tmp_path, config_file):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("report", "--config", config_file, "--stage", "classification", "--out", a) == 0
    assert run("report", "--config", a / "manifest.json", "--stage", "classification", "--out", b) == 0
    for p in a.iterdir():
        assert p.read_bytes() == (b / p.name).read_bytes()


def test_bad_config_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"scenes": [{"background_id": 7}]}')
    assert run("gen", "--config", bad, "--out", tmp_path / "o") != 0
    assert capsys.readouterr().err.startswith("roadcsi gen:")


def test_console_script_help():
    proc = subprocess.run([sys.executable, "-m", "roadcsi.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for name in ("gen", "ingest", "estimate", "features", "detect", "classify", "report"):
        assert name in proc.stdout
