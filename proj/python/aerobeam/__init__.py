"""Collaborative-beamforming UAV swarm: physics, environment and training.

Configurations are plain dicts in the layout of the JSON config files;
missing keys take their defaults.
"""

import json

from . import _aerobeam as _ext
from ._aerobeam import (
    ConfigError,
    DivergenceError,
    DomainError,
    Error,
    GeometryError,
    IoError,
    ShapeError,
    achievable_rate,
    array_factor,
    secrecy_rate,
    steering_phases,
)

__all__ = [
    "ConfigError",
    "DivergenceError",
    "DomainError",
    "Error",
    "GeometryError",
    "IoError",
    "ShapeError",
    "SwarmEnv",
    "achievable_rate",
    "array_factor",
    "compare",
    "config_hash",
    "default_config",
    "evaluate",
    "normalize_config",
    "propulsion_power",
    "received_power",
    "replay",
    "secrecy_rate",
    "steering_phases",
    "train",
]


def _text(config):
    return json.dumps(config or {})


def default_config():
    return json.loads(_ext.default_config())


def normalize_config(config):
    """Validated config with every default filled in."""
    return json.loads(_ext.normalize_config(_text(config)))


def config_hash(config=None):
    return _ext.config_hash(_text(config))


def received_power(af_mag, distance, config=None):
    return _ext.received_power(af_mag, distance, _text(config))


def propulsion_power(speed, config=None):
    return _ext.propulsion_power(speed, _text(config))


class SwarmEnv(_ext.SwarmEnv):
    def __init__(self, config=None):
        super().__init__(_text(config))


def train(algorithm, config=None, seed=0):
    """Runs one training seed; the trained agent is returned as a dict."""
    result = _ext.train(algorithm, _text(config), seed)
    result["agent"] = json.loads(result["agent"])
    return result


def evaluate(agent, config=None, episodes=10, seed=0):
    return _ext.evaluate(json.dumps(agent), _text(config), episodes, seed)


def compare(runs, baseline="TD3", window=100):
    """Returns (report dict, formatted table)."""
    report, table = _ext.compare([str(r) for r in runs], baseline, window)
    return json.loads(report), table


def replay(trajectory, config=None, tolerance=1e-10):
    return json.loads(_ext.replay(str(trajectory), _text(config), tolerance))
