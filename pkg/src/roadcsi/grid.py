"""Pilot lattice and known reference symbols."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigurationError

QPSK_ALPHABET = np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]) / np.sqrt(2.0)

_UINT64_MAX = 2**64 - 1


@dataclass(frozen=True)
class GridConfig:
    n_subcarriers: int = 900
    pilot_spacing: int = 6
    n_pilot_symbols_per_capture: int = 4
    seed: int = 0

    def __post_init__(self):
        for name in ("n_subcarriers", "pilot_spacing", "n_pilot_symbols_per_capture", "seed"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ConfigurationError(f"{name} must be an integer, got {value!r}")
        if self.n_subcarriers < 1:
            raise ConfigurationError("n_subcarriers must be positive")
        if not 1 <= self.pilot_spacing <= self.n_subcarriers:
            raise ConfigurationError(
                f"pilot_spacing must lie in [1, n_subcarriers={self.n_subcarriers}], got {self.pilot_spacing}"
            )
        if self.n_pilot_symbols_per_capture < 1:
            raise ConfigurationError("n_pilot_symbols_per_capture must be >= 1")
        if not 0 <= self.seed <= _UINT64_MAX:
            raise ConfigurationError("seed must be an unsigned 64-bit integer")

    @property
    def n_pilots(self) -> int:
        return -(-self.n_subcarriers // self.pilot_spacing)

    def to_dict(self) -> dict:
        return {k: int(v) for k, v in asdict(self).items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "GridConfig":
        if not isinstance(data, dict):
            raise ConfigurationError("grid config must be a JSON object")
        expected = {"n_subcarriers", "pilot_spacing", "n_pilot_symbols_per_capture", "seed"}
        if set(data) != expected:
            raise ConfigurationError(
                f"grid config must have exactly the fields {sorted(expected)}, got {sorted(data)}"
            )
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "GridConfig":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class PilotGrid:
    """Known pilot symbols ``symbols[k]`` (n_tx x N) on subcarrier ``pilot_indices[k]``."""

    config: GridConfig
    pilot_indices: np.ndarray
    symbols: np.ndarray = field(repr=False)

    @property
    def n_pilots(self) -> int:
        return len(self.pilot_indices)

    @property
    def n_tx(self) -> int:
        return self.symbols.shape[1]

    @property
    def n_symbols(self) -> int:
        return self.symbols.shape[2]

    def same_as(self, other: "PilotGrid") -> bool:
        return (
            self.config == other.config
            and np.array_equal(self.pilot_indices, other.pilot_indices)
            and np.array_equal(self.symbols, other.symbols)
        )


def build_pilot_grid(config: GridConfig, n_tx_streams: int = 1) -> PilotGrid:
    """Place pilots every ``pilot_spacing`` subcarriers and draw seeded QPSK symbols.

    The symbol array has shape ``(n_pilots, n_tx_streams, N)``.
    """
    if n_tx_streams < 1:
        raise ConfigurationError("n_tx_streams must be >= 1")
    indices = np.arange(0, config.n_subcarriers, config.pilot_spacing, dtype=np.int64)
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    picks = rng.integers(0, 4, size=(len(indices), n_tx_streams, config.n_pilot_symbols_per_capture))
    symbols = QPSK_ALPHABET[picks]
    indices.setflags(write=False)
    symbols.setflags(write=False)
    return PilotGrid(config=config, pilot_indices=indices, symbols=symbols)
