"""Binary pilot-observation files and their JSON sidecar.

The binary file holds interleaved little-endian float32 ``(re, im)`` pairs,
ordered scene, capture, pilot subcarrier, receive stream, pilot symbol. The
sidecar records the grid config, every scene, the byte offset of each scene's
first capture, and per-capture ids and noise levels.
"""
from __future__ import annotations

import json
import os
from itertools import groupby

import numpy as np

from .channel import PilotObservation, SceneConfig
from .errors import CaptureLengthError, CaptureParseError, ConfigurationError
from .grid import GridConfig, build_pilot_grid

FORMAT_NAME = "roadcsi-pilot-observations"
FORMAT_VERSION = 1
SAMPLE_DTYPE = np.dtype("<f4")
BYTES_PER_SAMPLE = 2 * SAMPLE_DTYPE.itemsize


def quantize(obs: PilotObservation) -> PilotObservation:
    """Round received samples to the file's float32 precision."""
    received = obs.received.astype(np.complex64).astype(np.complex128)
    return PilotObservation(
        received=received,
        grid=obs.grid,
        noise_sigma=obs.noise_sigma,
        scene=obs.scene,
        capture_id=obs.capture_id,
        true_channel=obs.true_channel,
    )


def _interleave(received: np.ndarray) -> np.ndarray:
    flat = np.ascontiguousarray(received).reshape(-1)
    out = np.empty(2 * flat.size, dtype=SAMPLE_DTYPE)
    out[0::2] = flat.real
    out[1::2] = flat.imag
    return out


def export_dataset(observations: list[PilotObservation], bin_path, sidecar_path, grid_config: GridConfig | None = None) -> dict:
    """Write observations (grouped by consecutive scene) and return the sidecar document."""
    if observations:
        grid = observations[0].grid
        grid_config = grid.config
        n_rx = observations[0].n_rx
        for obs in observations:
            if obs.scene is None:
                raise ConfigurationError("every exported observation needs a scene label")
            if obs.grid.config != grid_config or obs.received.shape != observations[0].received.shape:
                raise ConfigurationError("all exported observations must share one pilot grid")
    elif grid_config is None:
        raise ConfigurationError("an empty export needs an explicit grid config")
    else:
        n_rx = 1

    scenes = []
    offset = 0
    with open(bin_path, "wb") as fh:
        for scene, group in groupby(observations, key=lambda o: o.scene):
            group = list(group)
            scenes.append({
                "scene": scene.to_dict(),
                "offset": offset,
                "n_captures": len(group),
                "capture_ids": [int(o.capture_id) for o in group],
                "noise_sigma": [float(o.noise_sigma) for o in group],
            })
            for obs in group:
                data = _interleave(obs.received)
                fh.write(data.tobytes())
                offset += data.nbytes

    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "sample_format": "interleaved little-endian float32 (re, im)",
        "order": ["scene", "capture", "subcarrier", "rx", "symbol"],
        "n_rx": int(n_rx),
        "grid": grid_config.to_dict(),
        "scenes": scenes,
        "total_bytes": offset,
    }
    with open(sidecar_path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return doc


def _require(doc: dict, key: str, kind, text: str):
    if key not in doc:
        raise CaptureParseError(f"sidecar is missing '{key}'", 0)
    value = doc[key]
    if not isinstance(value, kind):
        pos = text.find(f'"{key}"')
        raise CaptureParseError(f"sidecar field '{key}' has the wrong type", max(pos, 0))
    return value


def read_sidecar(sidecar_path) -> dict:
    with open(sidecar_path, "rb") as fh:
        raw = fh.read()
    text = raw.decode("utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaptureParseError(f"malformed sidecar JSON: {exc.msg}", len(text[:exc.pos].encode("utf-8"))) from None
    if not isinstance(doc, dict):
        raise CaptureParseError("sidecar must be a JSON object", 0)
    if doc.get("format", FORMAT_NAME) != FORMAT_NAME:
        raise CaptureParseError(f"unknown sidecar format {doc.get('format')!r}", max(text.find('"format"'), 0))
    grid = _require(doc, "grid", dict, text)
    try:
        doc["grid"] = GridConfig.from_dict(grid)
    except (ConfigurationError, TypeError) as exc:
        raise CaptureParseError(f"invalid grid config: {exc}", max(text.find('"grid"'), 0)) from None
    _require(doc, "scenes", list, text)
    doc.setdefault("n_rx", 1)
    for entry in doc["scenes"]:
        if not isinstance(entry, dict) or not {"scene", "offset", "n_captures"} <= set(entry):
            raise CaptureParseError("scene entries need 'scene', 'offset' and 'n_captures'", max(text.find('"scenes"'), 0))
        try:
            entry["scene"] = SceneConfig.from_dict(entry["scene"])
        except (ConfigurationError, TypeError) as exc:
            raise CaptureParseError(f"invalid scene: {exc}", max(text.find('"scenes"'), 0)) from None
    return doc


def ingest_captures(path, sidecar_path) -> list[PilotObservation]:
    """Rebuild observations from a binary file and its sidecar."""
    doc = read_sidecar(sidecar_path)
    grid = build_pilot_grid(doc["grid"])
    n_rx = int(doc["n_rx"])
    per_capture = grid.n_pilots * n_rx * grid.n_symbols
    capture_bytes = per_capture * BYTES_PER_SAMPLE

    expected = sum(int(e["n_captures"]) for e in doc["scenes"]) * capture_bytes
    actual = os.path.getsize(path)
    if actual != expected:
        raise CaptureLengthError(f"binary holds {actual} bytes but the sidecar describes {expected}")

    raw = np.fromfile(path, dtype=SAMPLE_DTYPE)
    out = []
    for entry in doc["scenes"]:
        scene = entry["scene"]
        n = int(entry["n_captures"])
        start = int(entry["offset"])
        if start % BYTES_PER_SAMPLE or start + n * capture_bytes > actual:
            raise CaptureLengthError(f"scene block at byte {start} runs past the end of the binary")
        ids = entry.get("capture_ids", list(range(n)))
        sigmas = entry.get("noise_sigma", [0.0] * n)
        base = start // SAMPLE_DTYPE.itemsize
        for i in range(n):
            chunk = raw[base + 2 * i * per_capture: base + 2 * (i + 1) * per_capture].astype(np.float64)
            received = (chunk[0::2] + 1j * chunk[1::2]).reshape(grid.n_pilots, n_rx, grid.n_symbols)
            out.append(PilotObservation(
                received=received,
                grid=grid,
                noise_sigma=float(sigmas[i]),
                scene=scene,
                capture_id=int(ids[i]),
            ))
    return out
