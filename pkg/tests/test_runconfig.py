"""Config schema: strict parsing, defaults, round trips, error naming."""

import json

import pytest

from liouvmc import runconfig
from liouvmc.errors import ConfigError


def base_config():
    return {
        "version": 1,
        "model": {"variant": "zz", "n_sites": 4, "field": 1.0},
        "ansatz": {"beta": 2.0},
        "sampler": {"n_samples": 200},
        "optimizer": {"eta": 0.01},
        "seed": 7,
    }


def test_parse_minimal_config_defaults():
    cfg = runconfig.parse_config(base_config())
    assert cfg.model.variant == "zz"
    assert cfg.model.coupling == 2.0
    assert cfg.model.gamma == 1.0
    assert cfg.m_hidden == 8
    assert cfg.init_scale == 0.01
    assert cfg.sampler.n_chains == 4
    assert cfg.sampler.burn_in is None
    assert cfg.sampler.warm_start is True
    assert cfg.optimizer.lam == 1e-3
    assert cfg.optimizer.max_steps == 1000
    assert cfg.method == "sr"
    assert cfg.obs_samples == 125
    assert cfg.sweep_values is None
    assert cfg.outputs is None
    assert cfg.seed == 7


def test_beta_rounds_to_hidden_units():
    data = base_config()
    data["model"]["n_sites"] = 16
    data["ansatz"] = {"beta": 1.4}
    assert runconfig.parse_config(data).m_hidden == 22


def test_explicit_m_and_exclusivity():
    data = base_config()
    data["ansatz"] = {"m": 5}
    cfg = runconfig.parse_config(data)
    assert cfg.m_hidden == 5 and cfg.beta is None

    data["ansatz"] = {"beta": 1.0, "m": 5}
    with pytest.raises(ConfigError, match="mutually exclusive"):
        runconfig.parse_config(data)
    data["ansatz"] = {}
    with pytest.raises(ConfigError, match="either 'beta' or 'm'"):
        runconfig.parse_config(data)


def test_errors_name_the_offending_key():
    data = base_config()
    data["model"]["variant"] = "xy"
    with pytest.raises(ConfigError, match="model.variant"):
        runconfig.parse_config(data)

    data = base_config()
    data["optimizer"]["eta"] = True
    with pytest.raises(ConfigError, match="optimizer.eta"):
        runconfig.parse_config(data)

    data = base_config()
    data["sampler"]["typo"] = 1
    with pytest.raises(ConfigError, match="typo"):
        runconfig.parse_config(data)

    data = base_config()
    data["sweep"] = {"parameter": "h", "values": [0.5, "x"]}
    with pytest.raises(ConfigError, match=r"sweep.values\[1\]"):
        runconfig.parse_config(data)


def test_invalid_domain_values_become_config_errors():
    data = base_config()
    data["model"]["n_sites"] = 0
    with pytest.raises(ConfigError):
        runconfig.parse_config(data)

    data = base_config()
    data["optimizer"]["eta"] = 0.0
    with pytest.raises(ConfigError):
        runconfig.parse_config(data)

    data = base_config()
    data["sampler"]["n_samples"] = -3
    with pytest.raises(ConfigError):
        runconfig.parse_config(data)

    data = base_config()
    data["observables"] = {"n_samples": 0}
    with pytest.raises(ConfigError):
        runconfig.parse_config(data)


def test_version_gate():
    data = base_config()
    data["version"] = 2
    with pytest.raises(ConfigError, match="version"):
        runconfig.parse_config(data)
    del data["version"]
    with pytest.raises(ConfigError, match="version"):
        runconfig.parse_config(data)


def test_non_integer_rejected():
    data = base_config()
    data["model"]["n_sites"] = 3.5
    with pytest.raises(ConfigError, match="n_sites"):
        runconfig.parse_config(data)


def test_sweep_parsing():
    data = base_config()
    data["sweep"] = {"parameter": "h", "values": [0, 0.5, 1]}
    cfg = runconfig.parse_config(data)
    assert cfg.sweep_values == (0.0, 0.5, 1.0)

    data["sweep"] = {"parameter": "J", "values": [1.0]}
    with pytest.raises(ConfigError, match="sweep.parameter"):
        runconfig.parse_config(data)
    data["sweep"] = {"parameter": "h", "values": []}
    with pytest.raises(ConfigError, match="sweep.values"):
        runconfig.parse_config(data)


def test_method_selection():
    data = base_config()
    data["optimizer"]["method"] = "sga"
    assert runconfig.parse_config(data).method == "sga"
    data["optimizer"]["method"] = "adam"
    with pytest.raises(ConfigError, match="optimizer.method"):
        runconfig.parse_config(data)


def test_serialize_parse_round_trip():
    data = base_config()
    data["ansatz"]["init_scale"] = 0.05
    data["sweep"] = {"parameter": "h", "values": [0.5, 2.0]}
    data["outputs"] = "runs/demo"
    data["optimizer"]["lambda"] = 0.003
    cfg = runconfig.parse_config(data)
    again = runconfig.parse_config(runconfig.serialize_config(cfg))
    assert again == cfg


def test_load_config_file_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        runconfig.load_config(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text('{"version": 1,\n "model": }')
    with pytest.raises(ConfigError, match="line 2"):
        runconfig.load_config(bad)
    good = tmp_path / "good.json"
    good.write_text(json.dumps(base_config()))
    assert runconfig.load_config(good).seed == 7


def test_with_overrides():
    cfg = runconfig.parse_config(base_config())
    out = runconfig.with_overrides(cfg, seed=99, outputs="elsewhere")
    assert out.seed == 99 and out.outputs == "elsewhere"
    assert cfg.seed == 7  # original untouched
    same = runconfig.with_overrides(cfg)
    assert same == cfg
