"""Experiment configuration.

Config files are line oriented::

    # comment
    run.task = depth
    network.widths = 8, 16, 32

Every key must name an existing field; anything else is an error.
"""

from __future__ import annotations

import dataclasses
import hashlib
import typing
from dataclasses import dataclass, field
from pathlib import Path

TASKS = ("superres", "depth", "segmentation", "heatmap")


class ConfigError(ValueError):
    pass


@dataclass
class RunSection:
    task: str = "superres"
    seed: int = 0
    log_every: int = 10
    gan: bool = False


@dataclass
class DataSection:
    size: int = 32
    batch: int = 4
    val_batches: int = 2
    classes: int = 4
    keypoints: int = 2
    sigma: float = 6.0
    head_length: float = 8.0
    prefetch: int = 0


@dataclass
class NetworkSection:
    upsampler: str = "bilinear_additive"
    widths: tuple[int, ...] = (8, 16, 32)
    residual: bool = False
    skip: bool = False
    kernel: int = 3
    interp: str = "bilinear"
    intermediate_conv: bool = True
    bias: bool = True


@dataclass
class OptimSection:
    # empty name / zero lr fall back to the task defaults
    name: str = ""
    lr: float = 0.0
    momentum: float = 0.9
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    decay: float = 0.95
    eps: float = 0.0


@dataclass
class ScheduleSection:
    iterations: int = 500
    kind: str = "poly"
    decay_power: float = 0.9


@dataclass
class LossSection:
    name: str = ""
    berhu_continuous: bool = False


@dataclass
class GanSection:
    data: str = "points"
    modes: int = 8
    critic_steps: int = 5
    lam: float = 10.0
    latent: int = 8
    batch: int = 64


@dataclass
class NetworkConfig:
    run: RunSection = field(default_factory=RunSection)
    data: DataSection = field(default_factory=DataSection)
    network: NetworkSection = field(default_factory=NetworkSection)
    optim: OptimSection = field(default_factory=OptimSection)
    schedule: ScheduleSection = field(default_factory=ScheduleSection)
    loss: LossSection = field(default_factory=LossSection)
    gan: GanSection = field(default_factory=GanSection)

    def validate(self) -> "NetworkConfig":
        if self.run.task not in TASKS:
            raise ConfigError(f"run.task must be one of {TASKS}, got {self.run.task!r}")
        if self.optim.lr < 0:
            raise ConfigError("optim.lr must be positive")
        if self.schedule.kind not in ("poly", "constant"):
            raise ConfigError("schedule.kind must be 'poly' or 'constant'")
        if self.schedule.decay_power <= 0:
            raise ConfigError("schedule.decay_power must be > 0")
        if self.schedule.iterations < 0:
            raise ConfigError("schedule.iterations must be >= 0")
        if self.data.batch < 1 or self.data.size < 4:
            raise ConfigError("data.batch must be >= 1 and data.size >= 4")
        if len(self.network.widths) < 2:
            raise ConfigError("network.widths needs at least two entries")
        return self


def _parse_value(raw: str, typ, where: str):
    raw = raw.strip()
    origin = typing.get_origin(typ)
    try:
        if typ is bool:
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        if typ is str:
            return raw
        if origin is tuple:
            (inner, *_rest) = typing.get_args(typ)
            return tuple(_parse_value(part, inner, where) for part in raw.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {getattr(typ, '__name__', typ)}") from None
    raise ConfigError(f"{where}: unsupported field type {typ}")


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(str(x) for x in v)
    return str(v)


def parse_config(text: str, source: str = "<config>") -> NetworkConfig:
    cfg = NetworkConfig()
    sections = {f.name: f for f in dataclasses.fields(cfg)}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        if "=" not in line:
            raise ConfigError(f"{where}: expected 'section.key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key.count(".") != 1:
            raise ConfigError(f"{where}: key {key!r} must look like section.key")
        sec_name, name = key.split(".")
        if sec_name not in sections:
            raise ConfigError(f"{where}: unknown section {sec_name!r}")
        section = getattr(cfg, sec_name)
        hints = typing.get_type_hints(type(section))
        if name not in hints:
            raise ConfigError(f"{where}: unknown key {key!r}")
        setattr(section, name, _parse_value(value, hints[name], where))
    return cfg.validate()


def load_config(path) -> NetworkConfig:
    path = Path(path)
    return parse_config(path.read_text(), str(path))


def dump_config(cfg: NetworkConfig) -> str:
    lines = []
    for sec in dataclasses.fields(cfg):
        section = getattr(cfg, sec.name)
        for f in dataclasses.fields(section):
            lines.append(f"{sec.name}.{f.name} = {_format_value(getattr(section, f.name))}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: NetworkConfig) -> str:
    return hashlib.sha256(dump_config(cfg).encode()).hexdigest()[:16]


def override(cfg: NetworkConfig, **updates) -> NetworkConfig:
    """Copy with ``section__key=value`` replacements."""
    cfg = dataclasses.replace(cfg, **{f.name: dataclasses.replace(getattr(cfg, f.name)) for f in dataclasses.fields(cfg)})
    for key, value in updates.items():
        sec, name = key.split("__")
        section = getattr(cfg, sec)
        if not hasattr(section, name):
            raise ConfigError(f"unknown key {sec}.{name}")
        setattr(section, name, value)
    return cfg.validate()
