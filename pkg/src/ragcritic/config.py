"""Flat ``key=value`` configuration with ``CRITIC_``-prefixed environment overrides.

Resolution order is defaults < config file < environment < explicit overrides.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import typing
from pathlib import Path

from ragcritic.rewards import DEFAULT_VERDICT_MATRIX, LABELS, RewardConfig

ENV_PREFIX = "CRITIC_"


class ConfigError(ValueError):
    """Configuration that cannot be resolved into a runnable setup."""


def read_config_file(path: str | Path | None) -> dict[str, str]:
    if path is None:
        return {}
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            values[key.strip().lower()] = value.strip()
    return values


def env_values(keys, environ=None) -> dict[str, str]:
    environ = os.environ if environ is None else environ
    out = {}
    for key in keys:
        env_key = ENV_PREFIX + key.upper()
        if env_key in environ:
            out[key] = environ[env_key]
    return out


def _coerce(raw, hint):
    if not isinstance(raw, str):
        return raw
    origin = typing.get_origin(hint)
    if hint is bool:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {raw!r}")
    if hint is int:
        return int(raw)
    if hint is float:
        return float(raw)
    if origin is tuple:
        args = typing.get_args(hint)
        items = [p.strip() for p in raw.split(",") if p.strip()]
        inner = args[0] if args else str
        return tuple(_coerce(p, inner) for p in items)
    if origin in (typing.Union, getattr(__import__("types"), "UnionType", None)):
        args = [a for a in typing.get_args(hint) if a is not type(None)]
        if raw.lower() in ("", "none", "null"):
            return None
        return _coerce(raw, args[0])
    return raw


def build(cls, values: dict, prefix: str = ""):
    """Instantiate dataclass ``cls`` from string ``values`` (keys ``prefix + field``)."""
    hints = typing.get_type_hints(cls)
    kwargs = {}
    for f in dataclasses.fields(cls):
        key = prefix + f.name
        if key in values:
            try:
                kwargs[f.name] = _coerce(values[key], hints[f.name])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {values[key]!r} ({exc})") from exc
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {cls.__name__}: {exc}") from exc


def _matrix_keys():
    return [f"verdict_r_{gt.value.lower()}_{pred.value.lower()}" for gt in LABELS for pred in LABELS]


def reward_config(values: dict) -> RewardConfig:
    """RewardConfig from resolved values; matrix cells use ``verdict_r_<gt>_<pred>``."""
    matrix = [list(row) for row in DEFAULT_VERDICT_MATRIX]
    for i, gt in enumerate(LABELS):
        for j, pred in enumerate(LABELS):
            key = f"verdict_r_{gt.value.lower()}_{pred.value.lower()}"
            if key in values:
                matrix[i][j] = float(values[key])
    plain = {k: v for k, v in values.items() if not k.startswith("verdict_r_")}
    cfg = build(RewardConfig, plain)
    return dataclasses.replace(cfg, verdict_matrix=tuple(tuple(r) for r in matrix))


def known_keys(*classes, extra=()) -> list[str]:
    keys = list(extra) + _matrix_keys()
    for cls in classes:
        keys.extend(f.name for f in dataclasses.fields(cls))
    return keys


def resolve(path: str | Path | None, keys, overrides: dict | None = None, environ=None) -> dict:
    values = read_config_file(path)
    values.update(env_values(keys, environ))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return values


def digest(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, default=str, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()
