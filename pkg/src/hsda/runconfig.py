"""Run settings merged from a key=value file and command-line overrides.

The file format is one `key = value` per line, `#` comments, blank lines
ignored. Every key has a default below; unknown or duplicate keys are
rejected rather than silently dropped, since a typo in an experiment config
is exactly the mistake that must not pass unnoticed. The merged result is
serialized next to every output artifact so a run can be reproduced from
its own droppings.

This module must stay importable without numpy: the CLI reads HSDA_THREADS
and pins the BLAS thread pools before anything numeric loads.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Dict, Mapping, Optional

from .errors import ConfigError

MODEL_SCALES = ("full", "synth", "toy")
RAW_FORMATS = ("csv-v1",)


@dataclass
class RunConfig:
    """Every knob the command line exposes, with its documented default."""

    seed: int = 42
    out: str = "out"
    raw_format: str = "csv-v1"  # raw pen-stream dialect accepted by the parser
    z_max: float = 6.0  # robust z-score threshold for outlier replacement
    size: int = 128  # rendered image side in pixels
    n: int = 20  # synthetic records per class
    scale: str = "full"  # model preset: full | synth | toy
    multiscale: bool = True  # stage-wise feature fusion on/off
    lr0: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 0.05
    batch_size: int = 16
    max_epochs: int = 100
    patience: int = 10
    k_folds: int = 4
    test_fraction: float = 0.2
    contrastive_weight: float = 0.8  # 0 disables the template term

    def __post_init__(self):
        if self.scale not in MODEL_SCALES:
            raise ConfigError(
                "scale must be one of %s, got %r" % ("/".join(MODEL_SCALES), self.scale)
            )
        if self.raw_format not in RAW_FORMATS:
            raise ConfigError("unsupported raw format %r" % self.raw_format)
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in u64, got %r" % self.seed)
        for name in ("z_max", "size", "n"):
            if getattr(self, name) <= 0:
                raise ConfigError("%s must be positive, got %r" % (name, getattr(self, name)))
        # training fields are re-validated by TrainConfig at construction


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(key: str, value) -> object:
    """Cast a raw string (or an already-typed override) to the field's type."""
    typ = _FIELDS[key].type if isinstance(_FIELDS[key].type, type) else type(_FIELDS[key].default)
    if not isinstance(value, str):
        if typ is float and isinstance(value, int) and not isinstance(value, bool):
            return float(value)
        if isinstance(value, typ) and not (typ is int and isinstance(value, bool)):
            return value
        raise ConfigError("%s expects %s, got %r" % (key, typ.__name__, value))
    text = value.strip()
    if typ is bool:
        lowered = text.lower()
        if lowered in ("true", "yes", "1"):
            return True
        if lowered in ("false", "no", "0"):
            return False
        raise ConfigError("%s expects true/false, got %r" % (key, text))
    try:
        if typ is int:
            return int(text)
        if typ is float:
            return float(text)
    except ValueError:
        raise ConfigError("%s expects %s, got %r" % (key, typ.__name__, text)) from None
    return text


def parse_config_file(path) -> Dict[str, str]:
    """Read key=value lines; comments and blank lines are skipped."""
    values: Dict[str, str] = {}
    with open(path, "r") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError("%s:%d: expected key = value, got %r" % (path, line_no, stripped))
            key, _, raw = stripped.partition("=")
            key = key.strip()
            if key not in _FIELDS:
                raise ConfigError("%s:%d: unknown key %r" % (path, line_no, key))
            if key in values:
                raise ConfigError("%s:%d: duplicate key %r" % (path, line_no, key))
            values[key] = raw.strip()
    return values


def make_runconfig(path=None, overrides: Optional[Mapping[str, object]] = None) -> RunConfig:
    """Defaults, then the config file, then overrides (flags win)."""
    merged: Dict[str, object] = {}
    if path is not None:
        for key, raw in parse_config_file(path).items():
            merged[key] = _coerce(key, raw)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _FIELDS:
            raise ConfigError("unknown setting %r" % key)
        merged[key] = _coerce(key, value)
    return RunConfig(**merged)


def write_runconfig(cfg: RunConfig, path) -> None:
    """Serialize every field, one per line, in declaration order."""
    with open(path, "w") as fh:
        fh.write("# settings used to produce the artifacts in this directory\n")
        for f in dataclasses.fields(cfg):
            value = getattr(cfg, f.name)
            if isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = repr(value)
            fh.write("%s = %s\n" % (f.name, value))
