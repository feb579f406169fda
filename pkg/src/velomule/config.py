"""Runtime configuration merged from defaults, a JSON file, environment
variables, and command-line flags — later sources win in that order.

Environment variables use the ``VELOMULE_`` prefix. The config file is JSON
because it needs nothing fancier than strings, numbers, and one nested map
(the CSV column remaps).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Mapping

from .analytics import BASE_WEIGHTS
from .errors import ConfigError

__all__ = ["RuntimeConfig", "load_config", "ENV_PREFIX"]

ENV_PREFIX = "VELOMULE_"

_WEIGHT_SUM_TOLERANCE = 1e-9


@dataclass
class RuntimeConfig:
    stations: str | None = None
    status: str | None = None
    trips: str | None = None
    cache_dir: str | None = None
    strict: bool = False
    weights: tuple = BASE_WEIGHTS
    columns: dict = field(default_factory=dict)


_KEYS = {f.name for f in fields(RuntimeConfig)}


def _parse_weights(value, source: str) -> tuple:
    if isinstance(value, str):
        parts = [p.strip() for p in value.split(",")]
    elif isinstance(value, (list, tuple)):
        parts = list(value)
    else:
        raise ConfigError("weights", f"expected three numbers ({source})")
    if len(parts) != 3:
        raise ConfigError("weights", f"expected exactly 3 values, got {len(parts)} ({source})")
    try:
        weights = tuple(float(p) for p in parts)
    except (TypeError, ValueError):
        raise ConfigError("weights", f"not numeric ({source})") from None
    if any(w < 0 for w in weights):
        raise ConfigError("weights", f"must not be negative ({source})")
    if abs(sum(weights) - 1.0) > _WEIGHT_SUM_TOLERANCE:
        raise ConfigError("weights", f"must sum to 1, got {sum(weights)} ({source})")
    return weights


def _parse_bool(value, key: str, source: str) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str):
        lowered = value.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off", ""):
            return False
    raise ConfigError(key, f"expected a boolean ({source})")


def _apply_file(config: RuntimeConfig, path) -> None:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError("config", f"top level of {path} must be an object")
    for key, value in payload.items():
        if key not in _KEYS:
            raise ConfigError(key, f"unknown key in {path}")
        if key == "weights":
            config.weights = _parse_weights(value, str(path))
        elif key == "strict":
            config.strict = _parse_bool(value, key, str(path))
        elif key == "columns":
            if not isinstance(value, dict):
                raise ConfigError("columns", f"expected an object ({path})")
            config.columns = value
        else:
            if value is not None and not isinstance(value, str):
                raise ConfigError(key, f"expected a string ({path})")
            setattr(config, key, value)


def _apply_env(config: RuntimeConfig, env: Mapping[str, str]) -> None:
    for key in ("stations", "status", "trips", "cache_dir"):
        value = env.get(ENV_PREFIX + key.upper())
        if value is not None:
            setattr(config, key, value)
    strict = env.get(ENV_PREFIX + "STRICT")
    if strict is not None:
        config.strict = _parse_bool(strict, "strict", "environment")
    weights = env.get(ENV_PREFIX + "WEIGHTS")
    if weights is not None:
        config.weights = _parse_weights(weights, "environment")


def _apply_flags(config: RuntimeConfig, flags: Mapping) -> None:
    for key in ("stations", "status", "trips", "cache_dir"):
        value = flags.get(key)
        if value is not None:
            setattr(config, key, value)
    if flags.get("strict"):
        config.strict = True
    weights = flags.get("weights")
    if weights is not None:
        config.weights = _parse_weights(weights, "flags")


def load_config(file_path=None, env: Mapping[str, str] | None = None,
                flags: Mapping | None = None) -> RuntimeConfig:
    """Merge configuration with precedence flags > env > file > defaults.

    ``file_path`` may also come from the environment (VELOMULE_CONFIG) when
    not passed explicitly. Raises ConfigError naming the offending key.
    """
    env = os.environ if env is None else env
    config = RuntimeConfig()
    if file_path is None:
        file_path = env.get(ENV_PREFIX + "CONFIG")
    if file_path:
        _apply_file(config, file_path)
    _apply_env(config, env)
    if flags:
        _apply_flags(config, flags)
    return config
