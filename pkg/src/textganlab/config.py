"""Experiment configuration: INI file parsing, overrides, validation.

The file format is plain `key = value` under fixed sections.  Unknown
sections or keys are rejected so typos fail loudly.  Every key can also be
overridden on the command line with `--set section.key=value`.
"""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, fields

import numpy as np

MODES = ("gan", "wgan-clip", "wgan-gp", "wgan-lp")
LEVELS = ("word", "character")
CELLS = ("gru", "lstm")
DTYPES = {"float64": np.float64, "float32": np.float32}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    # [corpus]
    corpus_path: str = ""
    level: str = "word"
    max_vocab: int = 1000
    parts: int = 100
    line_cap: int = 10000
    # [model]
    cell: str = "gru"
    hidden_dim: int = 64
    embed_dim: int = 32
    noise_dim: int = 32
    layers: int = 1
    # [train]
    mode: str = "wgan-lp"
    lam: float = 10.0
    clip: float = 0.01
    batch_size: int = 128
    n_critic: int = 5
    iterations: int = 1000
    lr: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.9
    adam_eps: float = 1e-8
    seed: int = 0
    divergence_bound: float = 1e6
    dtype: str = "float64"
    # [curriculum]
    max_len: int = 25
    iters_per_stage: int = 100
    variable_len: bool = True
    teacher_start: float = 0.0
    teacher_decay: float = 1.0
    # [run]
    out: str = "runs/run"
    eval_interval: int = 50
    sample_interval: int = 50
    checkpoint_interval: int = 200
    eval_count: int = 640
    sample_count: int = 64
    wall_clock: bool = False


# section -> key-in-file -> (attribute, type)
SCHEMA: dict[str, dict[str, tuple[str, type]]] = {
    "corpus": {
        "path": ("corpus_path", str),
        "level": ("level", str),
        "max_vocab": ("max_vocab", int),
        "parts": ("parts", int),
        "line_cap": ("line_cap", int),
    },
    "model": {
        "cell": ("cell", str),
        "hidden_dim": ("hidden_dim", int),
        "embed_dim": ("embed_dim", int),
        "noise_dim": ("noise_dim", int),
        "layers": ("layers", int),
    },
    "train": {
        "mode": ("mode", str),
        "lambda": ("lam", float),
        "clip": ("clip", float),
        "batch_size": ("batch_size", int),
        "n_critic": ("n_critic", int),
        "iterations": ("iterations", int),
        "lr": ("lr", float),
        "beta1": ("beta1", float),
        "beta2": ("beta2", float),
        "adam_eps": ("adam_eps", float),
        "seed": ("seed", int),
        "divergence_bound": ("divergence_bound", float),
        "dtype": ("dtype", str),
    },
    "curriculum": {
        "max_len": ("max_len", int),
        "iters_per_stage": ("iters_per_stage", int),
        "variable_len": ("variable_len", bool),
        "teacher_start": ("teacher_start", float),
        "teacher_decay": ("teacher_decay", float),
    },
    "run": {
        "out": ("out", str),
        "eval_interval": ("eval_interval", int),
        "sample_interval": ("sample_interval", int),
        "checkpoint_interval": ("checkpoint_interval", int),
        "eval_count": ("eval_count", int),
        "sample_count": ("sample_count", int),
        "wall_clock": ("wall_clock", bool),
    },
}

_ATTR_TO_KEY = {attr: (sec, key) for sec, keys in SCHEMA.items()
                for key, (attr, _) in keys.items()}


def _convert(raw: str, typ: type, where: str):
    raw = raw.strip()
    try:
        if typ is bool:
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        return typ(raw)
    except ValueError as e:
        raise ConfigError(f"{where}: {e}") from None


def _apply(cfg: ExperimentConfig, section: str, key: str, raw: str) -> None:
    if section not in SCHEMA:
        raise ConfigError(f"unknown config section [{section}]")
    if key not in SCHEMA[section]:
        raise ConfigError(f"unknown key {key!r} in section [{section}]")
    attr, typ = SCHEMA[section][key]
    setattr(cfg, attr, _convert(raw, typ, f"[{section}] {key}"))


def load_config(path: str, overrides: list[str] | None = None) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as e:
        raise ConfigError(f"cannot parse {path}: {e}") from None
    cfg = ExperimentConfig()
    for section in parser.sections():
        for key, raw in parser.items(section):
            _apply(cfg, section, key, raw)
    apply_overrides(cfg, overrides or [])
    validate(cfg)
    return cfg


def apply_overrides(cfg: ExperimentConfig, overrides: list[str]) -> None:
    """Each override is `section.key=value` (e.g. train.lambda=100)."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        if "." not in dotted:
            raise ConfigError(f"override key must be section.key, got {dotted!r}")
        section, key = dotted.split(".", 1)
        _apply(cfg, section.strip(), key.strip(), raw)


def validate(cfg: ExperimentConfig) -> None:
    def req(cond: bool, msg: str) -> None:
        if not cond:
            raise ConfigError(msg)

    req(cfg.level in LEVELS, f"corpus.level must be one of {LEVELS}")
    req(cfg.cell in CELLS, f"model.cell must be one of {CELLS}")
    req(cfg.mode in MODES, f"train.mode must be one of {MODES}")
    req(cfg.dtype in DTYPES, f"train.dtype must be one of {tuple(DTYPES)}")
    req(cfg.max_vocab >= 4, "corpus.max_vocab must be >= 4")
    req(cfg.parts >= 2, "corpus.parts must be >= 2")
    req(cfg.line_cap >= 1, "corpus.line_cap must be >= 1")
    for name in ("hidden_dim", "embed_dim", "noise_dim", "layers",
                 "batch_size", "n_critic", "eval_interval", "sample_interval",
                 "checkpoint_interval", "eval_count", "sample_count",
                 "max_len", "iters_per_stage"):
        req(getattr(cfg, name) >= 1, f"{name} must be >= 1")
    req(cfg.iterations >= 0, "train.iterations must be >= 0")
    req(cfg.lr > 0, "train.lr must be positive")
    req(0 <= cfg.beta1 < 1 and 0 <= cfg.beta2 < 1, "adam betas must lie in [0, 1)")
    req(cfg.adam_eps > 0, "train.adam_eps must be positive")
    req(cfg.lam > 0, "train.lambda must be positive")
    req(cfg.clip > 0, "train.clip must be positive")
    req(cfg.seed >= 0, "train.seed must be >= 0")
    req(cfg.divergence_bound > 0, "train.divergence_bound must be positive")
    req(0.0 <= cfg.teacher_start <= 1.0, "curriculum.teacher_start must lie in [0, 1]")
    req(0.0 <= cfg.teacher_decay <= 1.0, "curriculum.teacher_decay must lie in [0, 1]")


def to_ini(cfg: ExperimentConfig) -> str:
    """Canonical snapshot: every key, fixed order, parse-stable values."""
    buf = io.StringIO()
    for section, keys in SCHEMA.items():
        buf.write(f"[{section}]\n")
        for key, (attr, typ) in keys.items():
            value = getattr(cfg, attr)
            if typ is bool:
                text = "true" if value else "false"
            elif typ is float:
                text = repr(float(value))
            else:
                text = str(value)
            buf.write(f"{key} = {text}\n")
        buf.write("\n")
    return buf.getvalue()


def np_dtype(cfg: ExperimentConfig):
    return DTYPES[cfg.dtype]


def config_fields() -> list[str]:
    return [f.name for f in fields(ExperimentConfig)]
