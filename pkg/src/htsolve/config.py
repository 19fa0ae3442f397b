"""Run configuration: dataclasses plus a flat key = value file format.

Example file::

    [run]
    d = 4
    operator = laplacian      # laplacian | tridiagonal
    backend = sine            # sine | tabulated:<manifest.json>
    max_level =               # empty: unbounded sine universe
    delta = 0.1
    eps = 1e-2                # absolute, or relative to eps0 with eps_relative = true
    eps_relative = true
    alpha = 1.0
    beta1 = 0.5
    beta2 = 0.5
    rank_cap = 500
    deterministic = true
    out = runs/poisson_d4

Keys may also appear without a section header.  Inline ``#`` comments are
stripped.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields, asdict
from typing import Optional

OPERATORS = ("laplacian", "tridiagonal")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    d: int = 2
    operator: str = "laplacian"
    backend: str = "sine"
    max_level: Optional[int] = None
    delta: float = 0.1
    eps: float = 1e-2
    eps_relative: bool = True
    alpha: float = 1.0
    beta1: float = 0.5
    beta2: float = 0.5
    rank_cap: int = 500
    bank_rank: int = 8
    diag: float = 2.0
    off: float = -1.0
    t: float = 0.5
    max_outer: int = 60
    deterministic: bool = True
    out: str = "runs/out"

    def validate(self):
        if self.d < 2:
            raise ConfigError("d must be >= 2")
        if self.operator not in OPERATORS:
            raise ConfigError(f"operator must be one of {OPERATORS}, got {self.operator!r}")
        if not (self.backend == "sine" or self.backend.startswith("tabulated:")):
            raise ConfigError("backend must be 'sine' or 'tabulated:<manifest>'")
        if not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0, 1)")
        if not self.eps > 0:
            raise ConfigError("eps must be positive")
        if self.beta1 < 0 or not self.beta2 > 0:
            raise ConfigError("need beta1 >= 0 and beta2 > 0")
        if self.rank_cap < 1:
            raise ConfigError("rank_cap must be positive")
        if self.max_level is not None and self.max_level < 0:
            raise ConfigError("max_level must be nonnegative")
        return self

    def to_dict(self):
        return asdict(self)


def _convert(f, raw):
    raw = raw.strip()
    t = f.type if isinstance(f.type, str) else f.type.__name__
    if t.startswith("Optional"):
        if raw == "" or raw.lower() == "none":
            return None
        t = t[len("Optional["):-1]
    if t == "bool":
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{f.name}: not a boolean: {raw!r}")
    try:
        if t == "int":
            return int(raw)
        if t == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"{f.name}: cannot parse {raw!r} as {t}") from None
    return raw.strip("\"'")


def parse_config(text, **overrides):
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    if not text.lstrip().startswith("["):
        text = "[run]\n" + text
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    known = {f.name: f for f in fields(RunConfig)}
    values = {}
    for section in cp.sections():
        for key, raw in cp.items(section):
            if key not in known:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            values[key] = _convert(known[key], raw)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values).validate()


def load_config(path, **overrides):
    with open(path) as fh:
        return parse_config(fh.read(), **overrides)


def dump_config(cfg):
    lines = ["[run]"]
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        lines.append(f"{f.name} = {'' if v is None else str(v).lower() if isinstance(v, bool) else v}")
    return "\n".join(lines) + "\n"
