"""YAML run configuration shared by the CLI subcommands.

Every key is optional; defaults reproduce the two-layer RR setup with
influence degree 8 and communication degree 4 on 200 nodes. Unknown keys are
rejected.

    n: 200                      # node count of both layers
    influence: {family: rr, d: 8, p: 0.0}
    communication: {family: rr, d: 4, p: 0.0}
    alpha: 0.5
    beta: 20                    # or "inf"
    lambda: 0.0
    mu: 0.0
    innovator: 0                # null for no innovator
    horizon: null               # null -> 4 n^2
    master_seed: 0
    replicates: 100
    initial_opinion: -1.0
    freeze_network: false
    plateau_band: 0.2
    snapshot_every: null        # null -> n
    lambda_grid: {start: 0.0, stop: 0.6, step: 0.02}   # or an explicit list
    mu_grid: [0.0]
    theory_samples: 0           # realisations for the expected lambda* estimate
    verbose: false
    derived: {}                 # written by the config echo, ignored on input
"""
from __future__ import annotations

import copy
import math
from pathlib import Path

import numpy as np
import yaml

from .harness import ScenarioConfig
from .netgen import TopologySpec


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


DEFAULTS = {
    "n": 200,
    "influence": {"family": "rr", "d": 8, "p": 0.0},
    "communication": {"family": "rr", "d": 4, "p": 0.0},
    "alpha": 0.5,
    "beta": 20.0,
    "lambda": 0.0,
    "mu": 0.0,
    "innovator": 0,
    "horizon": None,
    "master_seed": 0,
    "replicates": 100,
    "initial_opinion": -1.0,
    "freeze_network": False,
    "plateau_band": 0.2,
    "snapshot_every": None,
    "lambda_grid": {"start": 0.0, "stop": 0.6, "step": 0.02},
    "mu_grid": [0.0],
    "theory_samples": 0,
    "verbose": False,
    "derived": {},
}
LAYER_KEYS = {"family", "d", "p"}


def read(path) -> dict:
    """Raw mapping from a YAML file, not yet validated."""
    try:
        data = yaml.safe_load(Path(path).read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError("<file>", str(exc)) from exc
    if not isinstance(data, dict):
        raise ConfigError("<file>", "top level must be a mapping")
    return data


def load(path, overrides: dict | None = None) -> dict:
    return resolve(read(path), overrides)


def resolve(data: dict, overrides: dict | None = None) -> dict:
    """Merge ``data`` and ``overrides`` over the defaults and validate."""
    cfg = copy.deepcopy(DEFAULTS)
    for source in (data, overrides or {}):
        for key, value in source.items():
            if key not in DEFAULTS:
                raise ConfigError(key, "unknown key")
            if key in ("influence", "communication"):
                if not isinstance(value, dict):
                    raise ConfigError(key, "must be a mapping")
                bad = set(value) - LAYER_KEYS
                if bad:
                    raise ConfigError(f"{key}.{sorted(bad)[0]}", "unknown key")
                cfg[key].update(value)
            else:
                cfg[key] = value
    cfg["lambda_grid"] = _grid("lambda_grid", cfg["lambda_grid"])
    cfg["mu_grid"] = _grid("mu_grid", cfg["mu_grid"])
    beta = cfg["beta"]
    if isinstance(beta, str):
        if beta.strip().lower() != "inf":
            raise ConfigError("beta", f"expected a number or 'inf', got {beta!r}")
        cfg["beta"] = "inf"
    elif not isinstance(beta, (int, float)) or isinstance(beta, bool) or beta < 0 or math.isnan(beta):
        raise ConfigError("beta", f"expected a nonnegative number or 'inf', got {beta!r}")
    elif math.isinf(beta):
        cfg["beta"] = "inf"
    for key in ("n", "master_seed", "replicates", "theory_samples"):
        _int(cfg, key)
    for key in ("horizon", "snapshot_every", "innovator"):
        if cfg[key] is not None:
            _int(cfg, key)
    if cfg["snapshot_every"] is not None and cfg["snapshot_every"] <= 0:
        raise ConfigError("snapshot_every", "must be positive")
    for key in ("alpha", "lambda", "mu", "initial_opinion", "plateau_band"):
        if isinstance(cfg[key], bool) or not isinstance(cfg[key], (int, float)):
            raise ConfigError(key, f"expected a number, got {cfg[key]!r}")
        cfg[key] = float(cfg[key])
    if not isinstance(cfg["derived"], dict):
        raise ConfigError("derived", "must be a mapping")
    try:
        scenario(cfg)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(_guess_key(str(exc)), str(exc)) from exc
    return cfg


def _int(cfg, key):
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(key, f"expected an integer, got {v!r}")


def _grid(key, value) -> list[float]:
    if isinstance(value, dict):
        bad = set(value) - {"start", "stop", "step"}
        if bad or not {"start", "stop", "step"} <= set(value):
            raise ConfigError(key, "grid mapping needs exactly start, stop, step")
        start, stop, step = (float(value[k]) for k in ("start", "stop", "step"))
        if step <= 0 or stop < start:
            raise ConfigError(key, "need step > 0 and stop >= start")
        k = int(math.floor((stop - start) / step + 1e-9))
        return [float(v) for v in np.round(start + np.arange(k + 1) * step, 10)]
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return [float(value)]
    if isinstance(value, list) and value and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        return [float(v) for v in value]
    raise ConfigError(key, "expected a nonempty list of numbers or {start, stop, step}")


def _guess_key(message: str) -> str:
    for key in ("lam", "mu", "beta", "alpha", "innovator", "replicates", "initial_opinion",
                "horizon", "family", "d", "p", "n"):
        if message.startswith(key) or f" {key} " in f" {message} ":
            return {"lam": "lambda"}.get(key, key)
    return "<config>"


def layer_spec(cfg: dict, key: str) -> TopologySpec:
    layer = cfg[key]
    try:
        return TopologySpec(layer["family"], cfg["n"], int(layer["d"]), float(layer.get("p", 0.0)))
    except (ValueError, TypeError) as exc:
        raise ConfigError(key, str(exc)) from exc


def scenario(cfg: dict, lam: float | None = None, mu: float | None = None) -> ScenarioConfig:
    return ScenarioConfig(
        influence=layer_spec(cfg, "influence"),
        communication=layer_spec(cfg, "communication"),
        alpha=cfg["alpha"],
        beta=cfg["beta"],
        lam=cfg["lambda"] if lam is None else lam,
        mu=cfg["mu"] if mu is None else mu,
        innovator=cfg["innovator"],
        horizon=cfg["horizon"],
        master_seed=cfg["master_seed"],
        replicates=cfg["replicates"],
        initial_opinion=cfg["initial_opinion"],
        freeze_network=bool(cfg["freeze_network"]),
        plateau_band=cfg["plateau_band"],
    )


def dump(cfg: dict, path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg, sort_keys=True, default_flow_style=False))
