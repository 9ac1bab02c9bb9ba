"""Run configuration files: JSON with typed defaults and strict key checking."""
from __future__ import annotations

import dataclasses
import json
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .dataio import SynthConfig
from .metrics import DEFAULT_THRESHOLDS
from .network import VARIANTS
from .training import TrainConfig

BASELINE_SELECTORS = ("framevote", "ite")
MODEL_SELECTORS = VARIANTS + BASELINE_SELECTORS


class ConfigError(ValueError):
    pass


@dataclass
class SummarizeSettings:
    k_max: int = 5
    d_max: float = 3.0
    t_max: int = 6


@dataclass
class RunConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    summarization: SummarizeSettings = field(default_factory=SummarizeSettings)
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    data: str | None = None
    out: str | None = None

    @property
    def model(self) -> str:
        return self.train.ablation

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


def _type_name(tp) -> str:
    return getattr(tp, "__name__", None) or str(tp).replace("typing.", "")


def _coerce(key: str, value, tp):
    """Check ``value`` against annotation ``tp``; JSON lists become tuples."""
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        opts = typing.get_args(tp)
        if value is None and type(None) in opts:
            return None
        for opt in opts:
            if opt is type(None):
                continue
            try:
                return _coerce(key, value, opt)
            except ConfigError:
                pass
        raise ConfigError(f"{key}: expected {_type_name(tp)}, got {value!r}")
    if origin is tuple:
        args = typing.get_args(tp)
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key}: expected {_type_name(tp)}, got {value!r}")
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_coerce(f"{key}[{i}]", v, args[0]) for i, v in enumerate(value))
        if len(value) != len(args):
            raise ConfigError(f"{key}: expected {len(args)} values, got {len(value)}")
        return tuple(_coerce(f"{key}[{i}]", v, a) for i, (v, a) in enumerate(zip(value, args)))
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected float, got {value!r}")
        return float(value)
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected int, got {value!r}")
        return value
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected str, got {value!r}")
        return value
    raise ConfigError(f"{key}: unsupported field type {tp}")


def _build(cls, raw: dict, where: str):
    if not isinstance(raw, dict):
        raise ConfigError(f"{where or 'config'}: expected a JSON object, got {raw!r}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - names)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(where + k for k in unknown)}")
    kwargs = {}
    for name, value in raw.items():
        tp = hints[name]
        if dataclasses.is_dataclass(tp):
            kwargs[name] = _build(tp, value, f"{where}{name}.")
        else:
            kwargs[name] = _coerce(where + name, value, tp)
    return cls(**kwargs)


def config_from_dict(raw: dict) -> RunConfig:
    """Training keys sit at the top level; ``synth`` and ``summarization`` are sections."""
    if not isinstance(raw, dict):
        raise ConfigError(f"config must be a JSON object, got {type(raw).__name__}")
    train_keys = {f.name for f in dataclasses.fields(TrainConfig)}
    run_raw = {k: v for k, v in raw.items() if k not in train_keys}
    train_raw = {k: v for k, v in raw.items() if k in train_keys}
    if "train" in run_raw:
        raise ConfigError("put training keys at the top level, not under 'train'")
    cfg = _build(RunConfig, run_raw, "")
    cfg.train = _build(TrainConfig, train_raw, "")
    if cfg.train.ablation not in MODEL_SELECTORS:
        raise ConfigError(f"ablation: expected one of {MODEL_SELECTORS}, got {cfg.train.ablation!r}")
    try:
        cfg.train.validate()
        cfg.synth.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if not cfg.thresholds or any(not 0.0 < t <= 1.0 for t in cfg.thresholds):
        raise ConfigError(f"thresholds must be non-empty values in (0, 1], got {cfg.thresholds}")
    return cfg


def load_config(path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return config_from_dict(raw)
