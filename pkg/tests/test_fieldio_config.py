import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hermflow.config import ConfigError, RunConfig, dump_config, from_dict, load_config
from hermflow.fieldio import (
    FieldFormatError, config_hash, decode_field, encode_field, read_csv, read_field, read_json, strip_timestamp,
    write_csv, write_field, write_json,
)
from hermflow.grid import TensorField, band_limited_field, make_grid


# ---------------------------------------------------------------- snapshots

@given(n=st.sampled_from([1, 2]), sig=st.sampled_from(["", "L", "LB", "LLU"]), seed=st.integers(0, 999))
def test_field_round_trip_bit_exact(n, sig, seed):
    grid = make_grid(n, None, 8)
    comps = (n,) * len(sig)
    vals = band_limited_field(grid, np.random.default_rng(seed), real=False, comps=comps)
    f = TensorField(grid, sig, vals)
    g = decode_field(encode_field(f))
    assert g.grid == grid and g.signature == sig
    assert g.values.tobytes() == np.ascontiguousarray(vals, dtype=complex).tobytes()


def test_thin_field_expanded(tmp_path):
    grid = make_grid(1, (2 * math.pi, 4.0), 16)
    thin = np.arange(16, dtype=float).reshape(16, 1)
    write_field(tmp_path / "f.mafl", TensorField(grid, "", thin))
    back = read_field(tmp_path / "f.mafl")
    assert back.values.shape == (16, 16)
    assert back.grid.periods == (2 * math.pi, 4.0)
    assert np.array_equal(back.values.real, np.broadcast_to(thin, (16, 16)))


def test_bad_magic_and_truncation():
    grid = make_grid(1, None, 8)
    blob = encode_field(TensorField(grid, "", np.zeros(grid.shape)))
    with pytest.raises(FieldFormatError):
        decode_field(b"XXXX" + blob[4:])
    with pytest.raises(FieldFormatError):
        decode_field(blob[:-8])


# ----------------------------------------------------------------- artifacts

def test_json_timestamp_isolated(tmp_path):
    cfg = RunConfig().artifact_dict()
    write_json(tmp_path / "a.json", {"x": 1.5, "bad": float("nan")}, cfg, 1, "t0")
    write_json(tmp_path / "b.json", {"x": 1.5, "bad": float("nan")}, cfg, 1, "t1")
    a, b = (tmp_path / "a.json").read_bytes(), (tmp_path / "b.json").read_bytes()
    assert a != b and strip_timestamp(a) == strip_timestamp(b)
    doc = read_json(tmp_path / "a.json")
    assert doc["x"] == 1.5 and doc["bad"] == "nan"
    assert doc["provenance"]["config_hash"] == config_hash(cfg)


def test_csv_round_trip(tmp_path):
    write_csv(tmp_path / "t.csv", ["t", "v"], [[0.0, 0.1], [0.5, 1 / 3]], {}, None, "now")
    header, rows = read_csv(tmp_path / "t.csv")
    assert header == ["t", "v"]
    assert float(rows[1][1]) == 1 / 3


def test_config_hash_order_independent():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


# -------------------------------------------------------------------- config

def test_defaults_validate():
    cfg = load_config(None)
    assert cfg.geometry.res == 32 and cfg.geometry.metrics == 20
    assert cfg.smoothing.levels == [8, 16, 32, 64]


def test_yaml_round_trip(tmp_path):
    cfg = from_dict({"grid": {"n": 2, "res": 16}, "seed": 4, "smoothing": {"levels": [4, 8, 16]}})
    p = tmp_path / "c.yaml"
    p.write_text(dump_config(cfg))
    assert load_config(p) == cfg


@pytest.mark.parametrize("data", [
    {"grid": {"bogus": 1}},
    {"nonsense": {}},
    {"flow": {"initial": {"kind": "random", "extra": 2}}},
    {"grid": {"res": 9}},
    {"grid": {"n": 3}},
    {"grid": {"res": "big"}},
    {"grid": {"n": 1, "periods": [1.0]}},
    {"metric": {"kind": "round"}},
    {"forcing": {"kind": "expression"}},
    {"smoothing": {"levels": [8, 16]}},
    {"smoothing": {"levels": [16, 8, 32]}},
    {"elliptic": {"normalization": "max"}},
    {"geometry": {"axes": [7]}},
    {"threads": 0},
    {"grid": 5},
])
def test_invalid_configs(data):
    with pytest.raises(ConfigError):
        from_dict(data)


def test_non_mapping_config(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_config(p)
