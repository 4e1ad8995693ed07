"""Typed INI configuration shared by every command.

Sections mirror the package modules: ``[data]``, ``[noise]``, ``[model]``,
``[training]`` and ``[theory]``. Each key is typed by the default of the
matching dataclass field. Unknown sections or keys are errors that name the
offender. ``section.key=value`` overrides are applied on top of the file.
"""

import configparser
import io
from dataclasses import dataclass, field, fields, replace

from .errors import ConfigError
from .model import ModelConfig
from .training import TrainConfig


@dataclass(frozen=True)
class DataConfig:
    path: str = ""  # CSV to load; empty means generate
    kind: str = "sin_mix"
    length: int = 6000
    channels: int = 1
    seed: int = 0
    periods: tuple = (240.0, 24.0)
    amplitudes: tuple = (1.0, 0.5)
    noise_std: float = 0.1
    stride: int = 4  # window stride on every split


@dataclass(frozen=True)
class NoiseConfig:
    p: float = 0.0
    scale: float = 1.0
    seed: int = 0


@dataclass(frozen=True)
class TheoryConfig:
    dim: int = 8
    theta: int = 256
    sigma: float = 1.0
    trials: int = 10_000
    kind: str = "unitary_random"
    rho: float = 1.05
    seed: int = 0
    cs_rows: int = 8
    cs_cols: int = 32
    cs_keep: int = 16
    cs_a_min: float = 0.1
    cs_sampled: int = 2
    cs_trials: int = 100
    cs_projection: str = "zero"


SECTIONS = {
    "data": DataConfig,
    "noise": NoiseConfig,
    "model": ModelConfig,
    "training": TrainConfig,
    "theory": TheoryConfig,
}


@dataclass(frozen=True)
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    theory: TheoryConfig = field(default_factory=TheoryConfig)

    def to_ini(self):
        cp = configparser.ConfigParser(interpolation=None)
        for name in SECTIONS:
            obj = getattr(self, name)
            cp[name] = {f.name: _format(getattr(obj, f.name)) for f in fields(obj)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _format(value):
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(kind, text, where):
    text = text.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        if kind is tuple:
            return tuple(float(t) for t in text.split(",") if t.strip())
        return text
    except ValueError:
        raise ConfigError(f"{where}: expected {kind.__name__}, got {text!r}") from None


def _field_types(cls):
    return {f.name: type(f.default) for f in fields(cls)}


def _raw_values(text=None, overrides=()):
    raw = {name: {} for name in SECTIONS}
    if text:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"config file: {exc.message}") from None
        for section in cp.sections():
            if section not in SECTIONS:
                raise ConfigError(f"unknown config section [{section}]")
            raw[section].update(cp[section])
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        if section not in SECTIONS:
            raise ConfigError(f"unknown config section [{section}] in override {item!r}")
        raw[section][name] = value
    return raw


def load_config(text=None, overrides=(), base=None):
    """Build a :class:`RunConfig` from INI text and ``section.key=value`` overrides.

    Collects every problem (unknown keys, bad types, failed validation)
    before raising a single :class:`ConfigError` listing all of them.
    """
    base = base or RunConfig()
    raw = _raw_values(text, overrides)
    problems, built = [], {}
    for section, cls in SECTIONS.items():
        types = _field_types(cls)
        values = {}
        for key, value in raw[section].items():
            if key not in types:
                problems.append(f"unknown key {section}.{key}")
                continue
            try:
                values[key] = _parse(types[key], value, f"{section}.{key}")
            except ConfigError as exc:
                problems.append(str(exc))
        current = getattr(base, section)
        if section == "model":
            try:
                built[section] = current.replace(**values)
            except ValueError as exc:
                problems.extend(f"model: {e}" for e in str(exc).split("; "))
            continue
        try:
            built[section] = replace(current, **values)
        except ValueError as exc:
            problems.append(f"{section}: {exc}")
    problems.extend(_extra_checks(built))
    if problems:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(problems))
    return RunConfig(**built)


def _extra_checks(built):
    out = []
    data = built.get("data")
    if data is not None:
        if data.length < 1:
            out.append("data: length must be >= 1")
        if data.channels < 1:
            out.append("data: channels must be >= 1")
        if data.stride < 1:
            out.append("data: stride must be >= 1")
    noise = built.get("noise")
    if noise is not None and not 0.0 <= noise.p <= 1.0:
        out.append(f"noise: p must lie in [0, 1], got {noise.p}")
    return out


def read_config(path, overrides=()):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return load_config(text, overrides)
