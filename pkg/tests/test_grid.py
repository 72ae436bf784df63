import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from roadcsi.errors import ConfigurationError
from roadcsi.grid import QPSK_ALPHABET, GridConfig, build_pilot_grid


def test_default_grid_has_150_pilots():
    # Oracle: enumerate the subcarriers that fall on the lattice.
    expected = sum(1 for k in range(900) if k % 6 == 0)
    assert expected == 150
    grid = build_pilot_grid(GridConfig(n_subcarriers=900, pilot_spacing=6))
    assert grid.n_pilots == 150
    assert grid.symbols.shape == (150, 1, 4)


def test_single_lattice_point():
    grid = build_pilot_grid(GridConfig(n_subcarriers=12, pilot_spacing=12))
    assert grid.pilot_indices.tolist() == [0]


def test_regeneration_is_bit_identical():
    cfg = GridConfig(seed=99)
    a, b = build_pilot_grid(cfg), build_pilot_grid(cfg)
    assert a.config == b.config
    assert np.array_equal(a.pilot_indices, b.pilot_indices)
    assert a.symbols.tobytes() == b.symbols.tobytes()
    assert a.same_as(b)


def test_different_seed_changes_symbols():
    a = build_pilot_grid(GridConfig(seed=1))
    b = build_pilot_grid(GridConfig(seed=2))
    assert not np.array_equal(a.symbols, b.symbols)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(n_subcarriers=0),
        dict(pilot_spacing=0),
        dict(n_subcarriers=10, pilot_spacing=11),
        dict(n_pilot_symbols_per_capture=0),
        dict(seed=-1),
        dict(seed=2**64),
    ],
)
def test_invalid_config_rejected(kwargs):
    with pytest.raises(ConfigurationError):
        GridConfig(**kwargs)


@given(
    n=st.integers(1, 2000),
    s=st.integers(1, 2000),
    n_sym=st.integers(1, 6),
    seed=st.integers(0, 2**64 - 1),
)
def test_lattice_and_alphabet_properties(n, s, n_sym, seed):
    if s > n:
        s = n
    grid = build_pilot_grid(GridConfig(n, s, n_sym, seed))
    idx = grid.pilot_indices
    assert idx[0] == 0
    assert np.all(np.diff(idx) == s)
    assert idx[-1] < n
    assert idx[-1] + s >= n
    assert np.allclose(np.abs(grid.symbols), 1.0, atol=1e-12)
    dist = np.abs(grid.symbols.reshape(-1, 1) - QPSK_ALPHABET[None, :]).min(axis=1)
    assert np.all(dist < 1e-15)


def test_qpsk_frequencies_are_balanced():
    grid = build_pilot_grid(GridConfig(n_subcarriers=900, pilot_spacing=1, n_pilot_symbols_per_capture=4, seed=3))
    flat = grid.symbols.reshape(-1)
    assert flat.size >= 1000
    for point in QPSK_ALPHABET:
        share = np.mean(np.isclose(flat, point))
        assert abs(share - 0.25) <= 0.05


def test_json_round_trip_has_exactly_four_fields():
    cfg = GridConfig(n_subcarriers=120, pilot_spacing=4, n_pilot_symbols_per_capture=2, seed=2**63 + 5)
    doc = json.loads(cfg.to_json())
    assert set(doc) == {"n_subcarriers", "pilot_spacing", "n_pilot_symbols_per_capture", "seed"}
    assert GridConfig.from_json(cfg.to_json()) == cfg


def test_json_with_extra_or_missing_field_rejected():
    with pytest.raises(ConfigurationError):
        GridConfig.from_dict({"n_subcarriers": 12, "pilot_spacing": 1, "n_pilot_symbols_per_capture": 1})
    with pytest.raises(ConfigurationError):
        GridConfig.from_dict({"n_subcarriers": 12, "pilot_spacing": 1, "n_pilot_symbols_per_capture": 1, "seed": 0, "x": 1})


def test_pilot_grid_is_read_only():
    grid = build_pilot_grid(GridConfig())
    with pytest.raises(ValueError):
        grid.symbols[0, 0, 0] = 0
