"""Run configuration: a small versioned JSON schema shared by all subcommands.

Layout (see also the shipped presets):

    {
      "version": 1,
      "model":     {"variant": "zz", "n_sites": 4, "coupling": 2.0,
                    "field": 1.0, "gamma": 1.0},
      "ansatz":    {"beta": 2.0} or {"m": 8},  optional "init_scale"
      "sampler":   {"n_samples": 1125, "n_chains": 4, "burn_in": null,
                    "thinning": null, "warm_start": true},
      "optimizer": {"eta": 0.01, "lambda": 0.01, "max_steps": 1000,
                    "stop_cost": 1e-4, "stop_var": 1e-2, "method": "sr"},
      "observables": {"n_samples": 125},
      "sweep":     {"parameter": "h", "values": [0.0, 0.5, 1.0]},  optional
      "outputs":   "runs/example",  optional, the CLI --out overrides it
      "seed":      7
    }

Sample counts are per chain; burn_in/thinning null means the size-scaled
defaults. When "beta" is given the hidden-unit count is round(beta * N).
Parsing is strict: unknown keys, wrong types and bad values raise a config
error naming the offending key.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

from .errors import ConfigError
from .models import ModelSpec
from .optimizer import SrConfig
from .sampler import ChainConfig

SCHEMA_VERSION = 1

_SECTIONS = {"version", "model", "ansatz", "sampler", "optimizer",
             "observables", "sweep", "outputs", "seed"}


@dataclass
class RunConfig:
    model: ModelSpec
    beta: float | None
    m_hidden: int
    init_scale: float
    sampler: ChainConfig
    optimizer: SrConfig
    method: str
    obs_samples: int
    sweep_values: tuple | None
    outputs: str | None
    seed: int


def _section(data: dict, key: str, required: bool = True) -> dict:
    if key not in data:
        if required:
            raise ConfigError(f"config key '{key}': missing required section")
        return {}
    value = data[key]
    if not isinstance(value, dict):
        raise ConfigError(f"config key '{key}': expected an object")
    return value


def _reject_unknown(section: dict, allowed: set, path: str):
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"config key '{path}': unknown key(s) {sorted(unknown)}")


def _number(section: dict, key: str, path: str, default=None, required=False,
            integer=False, allow_none=False):
    if key not in section or section[key] is None:
        if key in section and allow_none:
            return None
        if required:
            raise ConfigError(f"config key '{path}.{key}': missing required value")
        return default
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"config key '{path}.{key}': expected a number, got {value!r}")
    if integer:
        if int(value) != value:
            raise ConfigError(f"config key '{path}.{key}': expected an integer, got {value!r}")
        return int(value)
    return float(value)


def parse_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    _reject_unknown(data, _SECTIONS, "<root>")
    version = _number(data, "version", "<root>", required=True, integer=True)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"config key 'version': expected {SCHEMA_VERSION}, got {version}")

    msec = _section(data, "model")
    _reject_unknown(msec, {"variant", "n_sites", "coupling", "field", "gamma"}, "model")
    variant = msec.get("variant")
    if variant not in ("zz", "xx"):
        raise ConfigError(f"config key 'model.variant': expected 'zz' or 'xx', got {variant!r}")
    try:
        model = ModelSpec(
            variant=variant,
            n_sites=_number(msec, "n_sites", "model", required=True, integer=True),
            coupling=_number(msec, "coupling", "model", default=2.0),
            field=_number(msec, "field", "model", default=1.0),
            gamma=_number(msec, "gamma", "model", default=1.0),
        )
    except ValueError as exc:
        raise ConfigError(f"config key 'model': {exc}") from exc

    asec = _section(data, "ansatz")
    _reject_unknown(asec, {"beta", "m", "init_scale"}, "ansatz")
    beta = _number(asec, "beta", "ansatz", allow_none=True)
    m_explicit = _number(asec, "m", "ansatz", integer=True, allow_none=True)
    if beta is None and m_explicit is None:
        raise ConfigError("config key 'ansatz': give either 'beta' or 'm'")
    if beta is not None and m_explicit is not None:
        raise ConfigError("config key 'ansatz': 'beta' and 'm' are mutually exclusive")
    if beta is not None:
        if beta < 0:
            raise ConfigError(f"config key 'ansatz.beta': must be >= 0, got {beta}")
        m_hidden = round(beta * model.n_sites)
    else:
        if m_explicit < 0:
            raise ConfigError(f"config key 'ansatz.m': must be >= 0, got {m_explicit}")
        m_hidden = m_explicit
    init_scale = _number(asec, "init_scale", "ansatz", default=0.01)
    if init_scale < 0:
        raise ConfigError(f"config key 'ansatz.init_scale': must be >= 0, got {init_scale}")

    ssec = _section(data, "sampler")
    _reject_unknown(ssec, {"n_samples", "n_chains", "burn_in", "thinning", "warm_start"}, "sampler")
    warm = ssec.get("warm_start", True)
    if not isinstance(warm, bool):
        raise ConfigError(f"config key 'sampler.warm_start': expected true/false, got {warm!r}")
    try:
        sampler = ChainConfig(
            n_samples=_number(ssec, "n_samples", "sampler", required=True, integer=True),
            n_chains=_number(ssec, "n_chains", "sampler", default=4, integer=True),
            burn_in=_number(ssec, "burn_in", "sampler", integer=True, allow_none=True),
            thinning=_number(ssec, "thinning", "sampler", integer=True, allow_none=True),
            warm_start=warm,
        )
    except ValueError as exc:
        raise ConfigError(f"config key 'sampler': {exc}") from exc

    osec = _section(data, "optimizer")
    _reject_unknown(osec, {"eta", "lambda", "max_steps", "stop_cost", "stop_var", "method"}, "optimizer")
    method = osec.get("method", "sr")
    if method not in ("sr", "sga"):
        raise ConfigError(f"config key 'optimizer.method': expected 'sr' or 'sga', got {method!r}")
    try:
        opt = SrConfig(
            eta=_number(osec, "eta", "optimizer", required=True),
            lam=_number(osec, "lambda", "optimizer", default=1e-3),
            max_steps=_number(osec, "max_steps", "optimizer", default=1000, integer=True),
            stop_cost=_number(osec, "stop_cost", "optimizer", default=1e-4),
            stop_var=_number(osec, "stop_var", "optimizer", default=1e-2),
        )
    except ValueError as exc:
        raise ConfigError(f"config key 'optimizer': {exc}") from exc

    obs_sec = _section(data, "observables", required=False)
    _reject_unknown(obs_sec, {"n_samples"}, "observables")
    obs_samples = _number(obs_sec, "n_samples", "observables", default=125, integer=True)
    if obs_samples < 1:
        raise ConfigError(f"config key 'observables.n_samples': must be >= 1, got {obs_samples}")

    sweep_values = None
    if "sweep" in data and data["sweep"] is not None:
        swsec = _section(data, "sweep")
        _reject_unknown(swsec, {"parameter", "values"}, "sweep")
        if swsec.get("parameter") != "h":
            raise ConfigError("config key 'sweep.parameter': only 'h' sweeps are supported")
        values = swsec.get("values")
        if not isinstance(values, list) or not values:
            raise ConfigError("config key 'sweep.values': expected a non-empty list of numbers")
        for i, v in enumerate(values):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"config key 'sweep.values[{i}]': expected a number, got {v!r}")
        sweep_values = tuple(float(v) for v in values)

    outputs = data.get("outputs")
    if outputs is not None and not isinstance(outputs, str):
        raise ConfigError(f"config key 'outputs': expected a string path, got {outputs!r}")
    seed = _number(data, "seed", "<root>", default=0, integer=True)

    return RunConfig(model=model, beta=beta, m_hidden=m_hidden, init_scale=init_scale,
                     sampler=sampler, optimizer=opt, method=method, obs_samples=obs_samples,
                     sweep_values=sweep_values, outputs=outputs, seed=seed)


def serialize_config(cfg: RunConfig) -> dict:
    ansatz_sec = {"beta": cfg.beta} if cfg.beta is not None else {"m": cfg.m_hidden}
    ansatz_sec["init_scale"] = cfg.init_scale
    out = {
        "version": SCHEMA_VERSION,
        "model": {
            "variant": cfg.model.variant,
            "n_sites": cfg.model.n_sites,
            "coupling": cfg.model.coupling,
            "field": cfg.model.field,
            "gamma": cfg.model.gamma,
        },
        "ansatz": ansatz_sec,
        "sampler": {
            "n_samples": cfg.sampler.n_samples,
            "n_chains": cfg.sampler.n_chains,
            "burn_in": cfg.sampler.burn_in,
            "thinning": cfg.sampler.thinning,
            "warm_start": cfg.sampler.warm_start,
        },
        "optimizer": {
            "eta": cfg.optimizer.eta,
            "lambda": cfg.optimizer.lam,
            "max_steps": cfg.optimizer.max_steps,
            "stop_cost": cfg.optimizer.stop_cost,
            "stop_var": cfg.optimizer.stop_var,
            "method": cfg.method,
        },
        "observables": {"n_samples": cfg.obs_samples},
        "seed": cfg.seed,
    }
    if cfg.sweep_values is not None:
        out["sweep"] = {"parameter": "h", "values": list(cfg.sweep_values)}
    if cfg.outputs is not None:
        out["outputs"] = cfg.outputs
    return out


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file {path}: not found") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return parse_config(data)


def with_overrides(cfg: RunConfig, seed=None, outputs=None) -> RunConfig:
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    if outputs is not None:
        cfg = replace(cfg, outputs=outputs)
    return cfg
