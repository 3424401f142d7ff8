"""YAML configuration files mirroring ``PipelineConfig``.

Example::

    voi:
      l_max: 80.0
      h_min: -2.73
    classify:
      srt_threshold: 0.2
    frame_interval: 2

Omitted keys take their defaults; unknown keys raise ``ConfigError``.
"""
from __future__ import annotations

import dataclasses
from pathlib import Path

import yaml

from .classify import ClassifyConfig
from .descriptor import VoiParams
from .errors import ConfigError
from .pipeline import PipelineConfig
from .retrieve import RetrievalConfig

_SECTIONS = {"voi": VoiParams, "classify": ClassifyConfig, "retrieval": RetrievalConfig}


def _coerce(cls, name, value):
    default = cls.__dataclass_fields__[name].type
    # annotations are strings under postponed evaluation
    if default in ("int", int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{cls.__name__}.{name} must be an integer, got {value!r}")
    elif default in ("float", float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{cls.__name__}.{name} must be a number, got {value!r}")
        value = float(value)
    elif default in ("bool", bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{cls.__name__}.{name} must be true/false, got {value!r}")
    return value


def _build(cls, data):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"section for {cls.__name__} must be a mapping")
    unknown = set(data) - set(cls.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kwargs = {k: _coerce(cls, k, v) for k, v in data.items()}
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{cls.__name__}: {exc}") from None


def config_from_dict(data: dict) -> PipelineConfig:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(data) - set(_SECTIONS) - {"frame_interval"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    sections = {name: _build(cls, data.get(name)) for name, cls in _SECTIONS.items()}
    interval = data.get("frame_interval", 1)
    if isinstance(interval, bool) or not isinstance(interval, int):
        raise ConfigError(f"frame_interval must be an integer, got {interval!r}")
    try:
        return PipelineConfig(frame_interval=interval, **sections)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> PipelineConfig:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(data)


def config_to_dict(cfg: PipelineConfig) -> dict:
    return dataclasses.asdict(cfg)


def dump_config(cfg: PipelineConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(config_to_dict(cfg), sort_keys=False))
