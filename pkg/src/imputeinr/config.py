"""Plain-text ``key = value`` run configuration.

Precedence: command-line flags > config file > built-in defaults.  Unknown
keys are rejected so typos do not silently fall back to defaults.
"""
from __future__ import annotations

import typing
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .errors import ImputeINRError
from .model import ModelConfig
from .training import TrainConfig


class ConfigError(ImputeINRError, ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0
    window: int = 96
    stride: int | None = None
    mask_rates: tuple[float, ...] = (0.1, 0.3, 0.5, 0.7, 0.9)
    seeds: tuple[int, ...] = (0,)
    metrics_scale: str = "raw"
    ablation: bool = False
    data: str | None = None
    checkpoint: str | None = None
    out: str | None = None

    def validate(self) -> "RunConfig":
        if self.metrics_scale not in ("raw", "standardized"):
            raise ConfigError(f"metrics_scale must be raw or standardized, got {self.metrics_scale!r}")
        if self.window < 1 or (self.stride is not None and self.stride < 1):
            raise ConfigError("window and stride must be positive")
        if any(not 0.0 <= r <= 1.0 for r in self.mask_rates):
            raise ConfigError("mask_rates must lie in [0, 1]")
        for key in ("data", "checkpoint"):
            p = getattr(self, key)
            if p is not None and not Path(p).exists():
                raise ConfigError(f"{key} path does not exist: {p}")
        return self

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in ("model", "train")}
        d["model"] = self.model.to_dict()
        d["train"] = asdict(self.train)
        return d


_RUN_KEYS = {f.name for f in fields(RunConfig)} - {"model", "train"}
_MODEL_KEYS = {f.name for f in fields(ModelConfig)}
# the train seed is driven by the top-level seed; mask_rate is spelled train_mask_rate
_TRAIN_ALIASES = {"train_mask_rate": "mask_rate"}
_TRAIN_KEYS = ({f.name for f in fields(TrainConfig)} - {"seed", "mask_rate"}) | set(_TRAIN_ALIASES)


def known_keys() -> list[str]:
    return sorted(_RUN_KEYS | _MODEL_KEYS | _TRAIN_KEYS)


def _field_type(cls, name):
    return typing.get_type_hints(cls)[name]


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _coerce(tp, text, key):
    if not isinstance(text, str):
        return text
    text = text.strip()
    args = typing.get_args(tp)
    if type(None) in args:
        if text.lower() in ("", "none", "null"):
            return None
        tp = next(a for a in args if a is not type(None))
        args = typing.get_args(tp)
    try:
        if tp is bool:
            return _parse_bool(text)
        if tp in (int, float, str):
            return tp(text)
        if typing.get_origin(tp) is tuple:
            inner = args[0]
            return tuple(inner(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r}") from exc
    raise ConfigError(f"unsupported type for {key}")


def parse_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known_keys():
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def load_file(path) -> dict[str, str]:
    return parse_text(Path(path).read_text(encoding="utf-8"), str(path))


def build(file_values: dict | None = None, overrides: dict | None = None,
          base: RunConfig | None = None) -> RunConfig:
    """Merge defaults, then file values, then overrides (None overrides are ignored)."""
    merged = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    base = base or RunConfig()
    run_kw, model_kw, train_kw = {}, {}, {}
    for key, value in merged.items():
        if key in _RUN_KEYS:
            run_kw[key] = _coerce(_field_type(RunConfig, key), value, key)
        elif key in _MODEL_KEYS:
            model_kw[key] = _coerce(_field_type(ModelConfig, key), value, key)
        elif key in _TRAIN_KEYS:
            name = _TRAIN_ALIASES.get(key, key)
            train_kw[name] = _coerce(_field_type(TrainConfig, name), value, key)
        else:
            raise ConfigError(f"unknown key {key!r}")
    seed = run_kw.get("seed", base.seed)
    try:
        model = replace(base.model, **model_kw)
        train = replace(base.train, seed=seed, **train_kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return replace(base, model=model, train=train, **run_kw)


def dump(cfg: RunConfig) -> str:
    """Render as a config file that :func:`load_file` reads back to the same RunConfig."""
    def fmt(v):
        if v is None:
            return "none"
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, (tuple, list)):
            return ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
        return repr(v) if isinstance(v, float) else str(v)

    lines = []
    for k in sorted(_RUN_KEYS):
        lines.append(f"{k} = {fmt(getattr(cfg, k))}")
    for k in sorted(_MODEL_KEYS):
        lines.append(f"{k} = {fmt(getattr(cfg.model, k))}")
    for k in sorted(_TRAIN_KEYS):
        lines.append(f"{k} = {fmt(getattr(cfg.train, _TRAIN_ALIASES.get(k, k)))}")
    return "\n".join(lines) + "\n"
