"""Smoke test of the installed extension: run with ``python -m pytest python/``."""

import cmath
import csv
import json
import math

import pytest

import dqed

CONFIG = {
    "schema_version": 1,
    "mesh": {"kind": "ball", "subdivisions": 2, "radius_m": 1e-8},
    "material": {"omega_p_rad_s": 1e16, "gamma_rad_s": 1e14},
    "modes": {"longitudinal": 3, "transverse": 3},
    "sweep": {"n_f": 128},
}


def write_config(tmp_path, cfg):
    p = tmp_path / "run.json"
    p.write_text(json.dumps(cfg))
    return p


def test_sphere_oracle():
    assert dqed.sphere_kappa_longitudinal(1) == (3.0, 3)


def test_susceptibility_of_a_lossless_metal():
    s = complex(0.0, 2.0)
    assert cmath.isclose(dqed.susceptibility(1.0, 0.0, 0.0, s), 1.0 / s**2)


def test_small_size_impulse_is_causal():
    h = dqed.small_size_impulse(1.0, 0.0, 0.1, 3.0, "par", 0.01, [-1.0, 0.0, 1.0])
    assert h[0] == 0.0
    assert all(math.isfinite(x) for x in h)


def test_ball_spectrum_near_sphere_value():
    spec = dqed.ball_spectrum(2, 1.0, longitudinal=3, transverse=0)
    assert abs(spec["kappa_parallel"][0] - 3.0) < 0.3
    assert spec["kappa_perpendicular"] == []


def test_response_and_cache(tmp_path):
    cfg = write_config(tmp_path, CONFIG)
    cache = tmp_path / "cache"
    first = dqed.run("response", cfg, tmp_path / "a", cache=cache)
    second = dqed.run("response", cfg, tmp_path / "b", cache=cache)
    assert not first["mode_cache_hit"] and second["mode_cache_hit"]
    rel = "response/H_par1_par1.csv"
    a = (tmp_path / "a" / rel).read_bytes()
    assert a == (tmp_path / "b" / rel).read_bytes()
    with open(tmp_path / "a" / rel) as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["omega_rad_s", "re", "im"]
    assert len(rows) == 129
    meta = json.loads((tmp_path / "a" / "metadata.json").read_text())
    assert meta["sweep"]["n_f"] == 128
    assert meta["design"]["degeneracy_gap"] == 1e-3


def test_errors_are_typed(tmp_path):
    bad = dict(CONFIG, extra_key=1)
    with pytest.raises(dqed.ConfigError):
        dqed.run("modes", write_config(tmp_path, bad), tmp_path / "out")
    strict = dict(CONFIG, synthesis={"realness_limit": 0.0})
    with pytest.raises(dqed.NumericError):
        dqed.run("impulse", write_config(tmp_path, strict), tmp_path / "out")


def test_normalize_config_fills_defaults():
    cfg = json.loads(dqed.normalize_config(json.dumps(CONFIG)))
    assert cfg["sweep"]["window"] == {"kind": "raised_cosine", "fraction": 0.1}
