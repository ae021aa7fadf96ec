"""YAML experiment files.

Example::

    system:
      N: 10
      K: 8
      noise_dbm: -104        # or sigma2 in Watts
      cell_radius: 250
      min_distance: 15
      pathloss_exponent: 3.76
      pathloss_const: 2.9512e-4
    sweep: rate
    grid: {start: 0.1, stop: 5.0, num: 15}   # or an explicit list
    rate: [2, 3]                             # or a single number
    trials: 500
    seed: 1
    schemes: [ZF, RZF, PA-RZF, A-OLP, OLP]
    freeze_positions: false
    workers: 1
    solver: {tol: 1.0e-10, max_iter: 5000}
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import yaml

from .exact import SolverOptions
from .harness import ExperimentConfig
from .model import SystemConfig, dbm_to_watt


class ConfigError(ValueError):
    pass


_SYSTEM_KEYS = {
    "N", "K", "sigma2", "noise_dbm", "cell_radius", "min_distance",
    "pathloss_exponent", "pathloss_const", "bandwidth",
}
_TOP_KEYS = {
    "system", "sweep", "grid", "rate", "trials", "seed", "schemes",
    "freeze_positions", "workers", "solver",
}


def _grid(spec):
    if isinstance(spec, dict):
        try:
            return tuple(np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"])))
        except KeyError as exc:
            raise ConfigError(f"grid range needs start, stop and num (missing {exc})") from None
    if isinstance(spec, (list, tuple)):
        return tuple(float(v) for v in spec)
    raise ConfigError("grid must be a list or a {start, stop, num} mapping")


def _rate(spec):
    if isinstance(spec, (int, float)):
        return float(spec)
    if isinstance(spec, (list, tuple)) and len(spec) == 2:
        return (float(spec[0]), float(spec[1]))
    raise ConfigError("rate must be a number or a [lo, hi] pair")


def system_from_dict(d: dict) -> SystemConfig:
    unknown = set(d) - _SYSTEM_KEYS
    if unknown:
        raise ConfigError(f"unknown system keys: {sorted(unknown)}")
    d = dict(d)
    if "noise_dbm" in d:
        if "sigma2" in d:
            raise ConfigError("give either sigma2 or noise_dbm, not both")
        d["sigma2"] = dbm_to_watt(float(d.pop("noise_dbm")))
    try:
        return SystemConfig(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def config_from_dict(d: dict, **overrides) -> ExperimentConfig:
    d = dict(d or {})
    unknown = set(d) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kw = {}
    if "system" in d:
        kw["system"] = system_from_dict(d["system"] or {})
    if "grid" in d:
        kw["grid"] = _grid(d["grid"])
    if "rate" in d:
        kw["rate"] = _rate(d["rate"])
    if "schemes" in d:
        kw["schemes"] = tuple(d["schemes"])
    if "solver" in d:
        try:
            kw["solver"] = SolverOptions(**d["solver"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"solver: {exc}") from None
    for key in ("sweep", "trials", "seed", "freeze_positions", "workers"):
        if key in d:
            kw[key] = d[key]
    kw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def read_config(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data or {}


def load_config(path, **overrides) -> ExperimentConfig:
    return config_from_dict(read_config(path), **overrides)
