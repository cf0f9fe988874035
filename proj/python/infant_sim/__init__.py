"""Simulated infant room, recurrent world model and intrinsic-reward agents."""

import json

from ._core import (
    BELIEF_DIM,
    LAYOUT_HASH,
    NUM_ACTIONS,
    OBS_DIM,
    ConfigError,
    Environment,
    FormatError,
    action_names,
    cli,
    default_config,
    final_metrics,
    normalized_entropy,
    observation_fields,
    read_trajectory,
)
from ._core import normalize_config as _normalize_config
from ._core import train as _train


def config(**overrides):
    """Default run config as a dict, with top-level keys overridden."""
    c = json.loads(default_config())
    for key, value in overrides.items():
        if key not in c:
            raise ConfigError(f"unknown config key: {key}")
        c[key] = value
    return json.loads(_normalize_config(json.dumps(c)))


def train(cfg, progress=False):
    """Train one agent; cfg is a dict or a JSON string."""
    text = cfg if isinstance(cfg, str) else json.dumps(cfg)
    return _train(text, progress)


__all__ = [
    "BELIEF_DIM",
    "LAYOUT_HASH",
    "NUM_ACTIONS",
    "OBS_DIM",
    "ConfigError",
    "Environment",
    "FormatError",
    "action_names",
    "cli",
    "config",
    "default_config",
    "final_metrics",
    "normalized_entropy",
    "observation_fields",
    "read_trajectory",
    "train",
]
