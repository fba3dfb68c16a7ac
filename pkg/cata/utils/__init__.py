import copy
import json
import os

import numpy as np
from yaml import YAMLError, safe_load

from cata.exceptions import ConfigError


def load_config(workspace: str) -> dict:
    """Load the configuration file.

    Args:
        workspace (str): Path to a YAML config file, or to a directory containing
            ``config.yaml`` / ``config.yml``.

    Returns:
        dict: dictionary containing the configuration parameters.

    Raises:
        FileNotFoundError: If the configuration file does not exist.
        ConfigError: If the file is not valid YAML or is not a mapping.
    """
    if os.path.isfile(workspace):
        candidates = [workspace]
    else:
        candidates = [
            os.path.join(workspace, config_file_name)
            for config_file_name in ["config.yaml", "config.yml"]
        ]
    for config_file in candidates:
        if os.path.exists(config_file):
            with open(config_file, "r") as f:
                try:
                    config = safe_load(f)
                except YAMLError as e:
                    mark = getattr(e, "problem_mark", None)
                    line = mark.line + 1 if mark is not None else None
                    problem = getattr(e, "problem", None) or str(e)
                    raise ConfigError(problem, config_file, line) from e
            if config is None:
                return {}
            if not isinstance(config, dict):
                raise ConfigError("top level must be a mapping", config_file, 1)
            return config
    raise FileNotFoundError("Config file not found in the workspace.")


def deep_merge(base: dict, override: dict) -> dict:
    """Returns a copy of ``base`` with ``override`` merged in, recursing into dicts."""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def derive_seed(master_seed: int, *keys: int) -> int:
    """Counter-based seed split.

    The derived seed depends only on the master seed and the keys, so adding
    trials to a batch never changes the seeds of earlier trials.

    Args:
        master_seed (int): The batch master seed.
        *keys (int): Counters identifying the job (e.g. setup index, trial index).

    Returns:
        int: A 32-bit seed.
    """
    sequence = np.random.SeedSequence(master_seed, spawn_key=tuple(keys))
    return int(sequence.generate_state(1)[0])


def dump_json(payload) -> str:
    """Serializes ``payload`` deterministically (sorted keys, fixed indent)."""
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n"
