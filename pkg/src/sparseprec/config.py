"""Experiment configuration files: flat TOML sections mapped onto dataclasses.

Sections are ``[experiment]``, ``[ista]``, ``[ccdf]``, ``[calibration]`` and
``[design]``. Every key is optional; omitted keys keep their defaults.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, fields, replace
from pathlib import Path

import tomli

from .numerics import DimensionError
from .precoders import IstaConfig
from .simulation import CalibrationConfig, CcdfConfig, ExperimentConfig

DESIGN_METHODS = ("zf", "l12", "elastic-net", "superposition")


class ConfigError(ValueError):
    """Unparseable file, unknown key or a value of the wrong type."""


@dataclass(frozen=True)
class DesignConfig:
    method: str = "zf"
    # CSV of re/im column pairs, relative to the config file; empty draws a
    # random channel from the experiment dimensions and seed
    channel_file: str = ""

    def __post_init__(self):
        if self.method not in DESIGN_METHODS:
            raise ValueError(f"design.method must be one of {DESIGN_METHODS}")


@dataclass(frozen=True)
class RunConfig:
    experiment: ExperimentConfig = ExperimentConfig()
    design: DesignConfig = DesignConfig()


_NESTED = {"ista": IstaConfig, "ccdf": CcdfConfig, "calibration": CalibrationConfig}
SECTIONS = ("experiment", "ista", "ccdf", "calibration", "design")


def _scalar_fields(cls):
    return [f for f in fields(cls) if f.name not in _NESTED]


def _locate(text: str, section: str, key: str) -> str:
    if not text:
        return ""
    current = ""
    for i, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip()
        elif current == section and re.match(rf"\s*{re.escape(key)}\s*=", line):
            return f"line {i}: "
    return ""


def _coerce(value, default, where: str):
    """Check ``value`` against the type of the field's default."""
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
    elif isinstance(default, int):
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif isinstance(default, float) or default is None:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif isinstance(default, str):
        if isinstance(value, str):
            return value
    elif isinstance(default, tuple):
        if isinstance(value, list):
            if all(isinstance(v, str) for v in value):
                return tuple(value)
            if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
                return tuple(float(v) for v in value)
        raise ConfigError(f"{where}: expected a list of numbers or of strings, got {value!r}")
    want = "number" if default is None else type(default).__name__
    raise ConfigError(f"{where}: expected {want}, got {value!r}")


def _section(cls, raw: dict, name: str, text: str, base) -> dict:
    known = {f.name: getattr(base, f.name) for f in _scalar_fields(cls)}
    out = {}
    for key, value in raw.items():
        where = f"{_locate(text, name, key)}{name}.{key}"
        if key not in known:
            raise ConfigError(f"{where}: unknown key; valid keys are {sorted(known)}")
        out[key] = _coerce(value, known[key], where)
    return out


def _build(cls, base, kw: dict, name: str):
    try:
        return replace(base, **kw)
    except DimensionError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[{name}] {exc}") from None


def from_dict(data: dict, text: str = "", base: RunConfig | None = None) -> RunConfig:
    base = base or RunConfig()
    for key, value in data.items():
        if key not in SECTIONS or not isinstance(value, dict):
            raise ConfigError(f"{_locate(text, '', key)}unknown section or top-level key {key!r}; sections are {SECTIONS}")
    exp = base.experiment
    nested = {}
    for name, cls in _NESTED.items():
        kw = _section(cls, data.get(name, {}), name, text, getattr(exp, name))
        nested[name] = _build(cls, getattr(exp, name), kw, name)
    kw = _section(ExperimentConfig, data.get("experiment", {}), "experiment", text, exp)
    experiment = _build(ExperimentConfig, exp, {**kw, **nested}, "experiment")
    kw = _section(DesignConfig, data.get("design", {}), "design", text, base.design)
    design = _build(DesignConfig, base.design, kw, "design")
    return RunConfig(experiment, design)


def loads(text: str, base: RunConfig | None = None) -> RunConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"TOML syntax error: {exc}") from None
    return from_dict(data, text, base)


def load(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        return loads(text)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _toml_string(text: str) -> str:
    out = []
    for ch in text:
        if ch in '"\\':
            out.append("\\" + ch)
        elif ord(ch) < 0x20 or ord(ch) == 0x7F:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    return '"' + "".join(out) + '"'


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if isinstance(v, str):
        return _toml_string(v)
    if isinstance(v, (tuple, list)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v).__name__}")


def _dump_section(name: str, obj, cls) -> list:
    lines = [f"[{name}]"]
    for f in _scalar_fields(cls):
        v = getattr(obj, f.name)
        if v is not None:
            lines.append(f"{f.name} = {_toml_value(v)}")
    return lines + [""]


def dumps(cfg: RunConfig) -> str:
    exp = cfg.experiment
    lines = _dump_section("experiment", exp, ExperimentConfig)
    for name, cls in _NESTED.items():
        lines += _dump_section(name, getattr(exp, name), cls)
    lines += _dump_section("design", cfg.design, DesignConfig)
    return "\n".join(lines)


def parse_override(item: str) -> tuple:
    """``section.field=value`` with a TOML value; bare words are taken as strings."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} must look like section.field=value")
    key, raw = item.split("=", 1)
    key = key.strip()
    if key.count(".") != 1:
        raise ConfigError(f"override key {key!r} must be section.field")
    try:
        value = tomli.loads(f"v = {raw.strip()}")["v"]
    except tomli.TOMLDecodeError:
        value = raw.strip()
    section, name = key.split(".")
    return section, name, value


def apply_overrides(cfg: RunConfig, items) -> RunConfig:
    data: dict = {}
    for item in items:
        section, name, value = parse_override(item)
        data.setdefault(section, {})[name] = value
    return from_dict(data, base=cfg) if data else cfg
