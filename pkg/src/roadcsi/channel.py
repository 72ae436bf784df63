"""Road-scene channel synthesis and noisy pilot observations.

A scene's channel on pilot subcarrier ``k`` is

    H[k] = g * sum_l h_l exp(-2j pi f_k tau_l) + a_v exp(j phi_v) exp(-2j pi f_k tau_v)

where the background taps ``h_l`` and delays ``tau_l`` are fixed by the
background id, every capture adds a small complex jitter to the taps, and the
vehicle term is a single forward-scatter path whose amplitude ``a_v`` scales
with the vehicle's frontal area. ``f_k`` is the subcarrier index divided by the
number of subcarriers, delays are in samples.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigurationError, RangeError, ShapeError
from .grid import PilotGrid

_UINT64_MAX = 2**64 - 1
# Root entropy for the fixed road environments; independent of any scene seed so
# that with/without-vehicle scenes over one background share the same taps.
BACKGROUND_ENTROPY = 0x5EED_0F_B0AD
N_BACKGROUNDS = 5

# Stream ids in the per-capture seed scheme.
STREAM_JITTER = 0
STREAM_NOISE = 1


class Vehicle(str, enum.Enum):
    NONE = "None"
    TWO_WHEELER = "TwoWheeler"
    SEDAN = "Sedan"
    SUV = "Suv"

    @property
    def class_id(self) -> int:
        return _CLASS_IDS[self]

    @classmethod
    def from_class_id(cls, class_id: int) -> "Vehicle":
        for vehicle, cid in _CLASS_IDS.items():
            if cid == class_id:
                return vehicle
        raise ValueError(f"unknown class id {class_id}")

    @classmethod
    def parse(cls, value) -> "Vehicle":
        if isinstance(value, Vehicle):
            return value
        if value is None:
            return cls.NONE
        try:
            return cls(value)
        except ValueError:
            raise ConfigurationError(f"unknown vehicle {value!r}") from None


_CLASS_IDS = {Vehicle.NONE: 0, Vehicle.TWO_WHEELER: 1, Vehicle.SEDAN: 2, Vehicle.SUV: 3}

# Width x height in metres (length is along the road and does not face the link).
VEHICLE_DIMENSIONS_M = {
    Vehicle.TWO_WHEELER: (1.761, 0.710, 1.158),
    Vehicle.SEDAN: (3.985, 1.734, 1.505),
    Vehicle.SUV: (3.998, 1.765, 1.708),
}


def frontal_area(vehicle: Vehicle) -> float:
    if vehicle is Vehicle.NONE:
        return 0.0
    _, width, height = VEHICLE_DIMENSIONS_M[vehicle]
    return width * height


def vehicle_scale(vehicle: Vehicle) -> float:
    """Frontal area normalised to the sedan."""
    return frontal_area(vehicle) / frontal_area(Vehicle.SEDAN)


@dataclass(frozen=True)
class SceneConfig:
    background_id: int
    vehicle: Vehicle = Vehicle.NONE
    snr_db: float = 30.0
    n_captures: int = 1000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "vehicle", Vehicle.parse(self.vehicle))
        if not isinstance(self.background_id, (int, np.integer)) or not 1 <= self.background_id <= N_BACKGROUNDS:
            raise ConfigurationError(f"background_id must be in [1, {N_BACKGROUNDS}], got {self.background_id!r}")
        snr = float(self.snr_db)
        if math.isnan(snr) or snr == -math.inf:
            raise ConfigurationError(f"snr_db must be finite or +inf (noise disabled), got {self.snr_db!r}")
        object.__setattr__(self, "snr_db", snr)
        if not isinstance(self.n_captures, (int, np.integer)) or self.n_captures < 1:
            raise ConfigurationError("n_captures must be a positive integer")
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed <= _UINT64_MAX:
            raise ConfigurationError("seed must be an unsigned 64-bit integer")

    @property
    def label(self) -> int:
        return self.vehicle.class_id

    def to_dict(self) -> dict:
        d = asdict(self)
        d["vehicle"] = self.vehicle.value
        d["background_id"] = int(self.background_id)
        d["n_captures"] = int(self.n_captures)
        d["seed"] = int(self.seed)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SceneConfig":
        return cls(**data)


@dataclass(frozen=True)
class ChannelModel:
    """Tunable parameters of the synthetic road channel."""

    n_taps: int = 4
    # Tap power halves every ``tap_half_life`` taps.
    tap_half_life: float = 1.0
    max_delay: float = 12.0
    # Path-loss scale applied to the background response.
    background_gain: float = 1.0
    # Forward-scatter path amplitude for the sedan; other vehicles scale by frontal area.
    vehicle_gain: float = 28.0
    vehicle_max_delay: float = 1.0
    # Per-capture complex jitter, relative to each tap's amplitude scale.
    jitter_std: float = 0.05
    # Per-capture relative jitter of the forward-scatter amplitude.
    vehicle_jitter: float = 0.045
    # Per-capture phase jitter (radians) of the forward-scatter path.
    vehicle_phase_jitter: float = 1.0

    def __post_init__(self):
        if self.n_taps < 1:
            raise ConfigurationError("n_taps must be >= 1")
        if self.tap_half_life <= 0 or self.max_delay < 0 or self.vehicle_max_delay < 0:
            raise ConfigurationError("tap_half_life must be positive and delays nonnegative")
        if min(self.background_gain, self.vehicle_gain, self.jitter_std, self.vehicle_jitter, self.vehicle_phase_jitter) < 0:
            raise ConfigurationError("gains and jitter must be nonnegative")

    def tap_powers(self) -> np.ndarray:
        p = 0.5 ** (np.arange(self.n_taps) / self.tap_half_life)
        return p / p.sum()

    def jitter_variance(self) -> float:
        """Per-subcarrier variance of the background response across captures."""
        return (self.jitter_std * self.background_gain) ** 2

    def to_dict(self) -> dict:
        return asdict(self)


DEFAULT_CHANNEL_MODEL = ChannelModel()


@dataclass(frozen=True, eq=False)
class BackgroundGeometry:
    taps: np.ndarray
    delays: np.ndarray
    vehicle_delay: float
    vehicle_phase: float


def background_geometry(background_id: int, model: ChannelModel = DEFAULT_CHANNEL_MODEL) -> BackgroundGeometry:
    rng = np.random.default_rng(np.random.SeedSequence(BACKGROUND_ENTROPY, spawn_key=(int(background_id),)))
    powers = model.tap_powers()
    taps = np.sqrt(powers / 2) * (rng.standard_normal(model.n_taps) + 1j * rng.standard_normal(model.n_taps))
    delays = np.concatenate([[0.0], np.sort(rng.uniform(1.0, max(model.max_delay, 1.0), model.n_taps - 1))])
    vehicle_delay = float(rng.uniform(0.0, model.vehicle_max_delay))
    vehicle_phase = float(rng.uniform(-np.pi, np.pi))
    return BackgroundGeometry(taps=taps, delays=delays, vehicle_delay=vehicle_delay, vehicle_phase=vehicle_phase)


def capture_seed_sequence(seed: int, capture_index: int, stream: int) -> np.random.SeedSequence:
    """Counter-derived substream: (scene seed, capture index, stream id)."""
    return np.random.SeedSequence(int(seed), spawn_key=(int(capture_index), int(stream)))


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    gains: np.ndarray
    scene: SceneConfig
    capture_index: int = 0


def synth_channel(
    scene: SceneConfig,
    grid: PilotGrid,
    capture_index: int,
    model: ChannelModel = DEFAULT_CHANNEL_MODEL,
) -> ChannelRealization:
    if not 0 <= capture_index < scene.n_captures:
        raise RangeError(f"capture_index {capture_index} outside [0, {scene.n_captures})")
    geom = background_geometry(scene.background_id, model)
    rng = np.random.default_rng(capture_seed_sequence(scene.seed, capture_index, STREAM_JITTER))

    scale = np.sqrt(model.tap_powers() / 2) * model.jitter_std
    jitter = scale * (rng.standard_normal(model.n_taps) + 1j * rng.standard_normal(model.n_taps))
    amp_jitter = rng.standard_normal()
    phase_jitter = rng.standard_normal()

    freqs = grid.pilot_indices / grid.config.n_subcarriers
    steering = np.exp(-2j * np.pi * np.outer(freqs, geom.delays))
    gains = model.background_gain * (steering @ (geom.taps + jitter))

    if scene.vehicle is not Vehicle.NONE:
        amplitude = model.vehicle_gain * vehicle_scale(scene.vehicle) * (1.0 + model.vehicle_jitter * amp_jitter)
        phase = geom.vehicle_phase + model.vehicle_phase_jitter * phase_jitter
        gains = gains + amplitude * np.exp(1j * phase - 2j * np.pi * freqs * geom.vehicle_delay)

    gains.setflags(write=False)
    return ChannelRealization(gains=gains, scene=scene, capture_index=capture_index)


@dataclass(frozen=True, eq=False)
class PilotObservation:
    """Received pilots ``received[k]`` (n_rx x N) on every pilot subcarrier."""

    received: np.ndarray
    grid: PilotGrid
    noise_sigma: float
    scene: SceneConfig | None = None
    capture_id: int = 0
    true_channel: ChannelRealization | None = field(default=None, repr=False)

    @property
    def n_rx(self) -> int:
        return self.received.shape[1]


def noise_sigma_for(signal_power: float, snr_db: float) -> float:
    if snr_db == math.inf:
        return 0.0
    return math.sqrt(signal_power / 10.0 ** (snr_db / 10.0))


def observe(
    channel: ChannelRealization,
    grid: PilotGrid,
    snr_db: float,
    seed: int | np.random.SeedSequence,
) -> PilotObservation:
    """Y = H P + noise on each pilot subcarrier; ``snr_db=inf`` disables noise.

    The SNR is the ratio of mean received pilot power to complex noise variance.
    """
    h = np.asarray(channel.gains)
    if h.ndim != 1 or h.shape[0] != grid.n_pilots:
        raise ShapeError(f"channel has {h.shape} gains but the grid carries {grid.n_pilots} pilots")
    if grid.n_tx != 1:
        raise ShapeError("the scene simulator drives a single transmit stream")

    clean = h[:, None, None] * grid.symbols
    sigma = noise_sigma_for(float(np.mean(np.abs(clean) ** 2)), float(snr_db))
    if sigma > 0:
        rng = np.random.default_rng(seed)
        noise = (sigma / np.sqrt(2)) * (rng.standard_normal(clean.shape) + 1j * rng.standard_normal(clean.shape))
        received = clean + noise
    else:
        received = clean
    return PilotObservation(
        received=received,
        grid=grid,
        noise_sigma=sigma,
        scene=channel.scene,
        capture_id=channel.capture_index,
        true_channel=channel,
    )


def generate_scene(scene: SceneConfig, grid: PilotGrid, model: ChannelModel = DEFAULT_CHANNEL_MODEL) -> list[PilotObservation]:
    out = []
    for i in range(scene.n_captures):
        channel = synth_channel(scene, grid, i, model)
        out.append(observe(channel, grid, scene.snr_db, capture_seed_sequence(scene.seed, i, STREAM_NOISE)))
    return out


def generate_dataset(
    scenes: list[SceneConfig],
    grid: PilotGrid,
    model: ChannelModel = DEFAULT_CHANNEL_MODEL,
) -> list[PilotObservation]:
    """All captures of all scenes, scene order then capture index."""
    if not scenes:
        raise ConfigurationError("at least one scene is required")
    out: list[PilotObservation] = []
    for scene in scenes:
        out.extend(generate_scene(scene, grid, model))
    return out
