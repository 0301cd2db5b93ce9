"""Flat ``key = value`` run configuration.

One key per line, ``#`` starts a comment, lists are comma separated. Every key
has a default, so an empty file is a valid configuration.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .hilbert import SystemParams


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")
        self.key = key
        self.line = line


def _choice(*options):
    def check(value):
        if value not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
    return check


def _positive(value):
    if not value > 0:
        raise ValueError("must be positive")


def _non_negative(value):
    if not value >= 0:
        raise ValueError("must be non-negative")


def _open_unit(value):
    if not 0 < value < 1:
        raise ValueError("must lie in (0, 1)")


def _at_least(n):
    def check(value):
        if value < n:
            raise ValueError(f"must be at least {n}")
    return check


def _seed(value):
    if not 0 <= value < 2**64:
        raise ValueError("must fit in an unsigned 64-bit integer")


def _positive_list(values):
    if not values or any(not v > 0 for v in values):
        raise ValueError("must be a non-empty list of positive numbers")


@dataclass(frozen=True)
class RunConfig:
    # system (rates in units of kappa)
    g_f: float = 9.0
    g: float = 9.0
    gamma: float = 2.0
    e1: float = 0.1
    e2: float = 0.1
    n_max: int = 4
    # coupling distribution
    density: str = "ensemble"
    mask: str = "masked"
    mask_width: float = 0.0
    g_max: float = 10.0
    f_cut: float = 0.1
    samples: int = 1_000_000
    bins: int = 90
    nodes: int = 32
    seed: int = 0
    # solver
    n_b: int = 3
    tol: float = 1e-9
    # sweeps
    tau_w: float = 0.1
    delta_tilde_min: float = 0.0
    delta_tilde_max: float = 6.0
    delta_tilde_step: float = 0.05
    background_subtract: bool = False
    g_grid_min: float = 1.0
    g_grid_max: float = 10.0
    g_grid_step: float = 0.5
    tau_w_min: float = 0.005
    tau_w_max: float = 0.5
    tau_w_count: int = 50
    tau_lo: float = 0.005
    tau_hi: float = 2.0
    tau_tol: float = 1e-3
    opt_axis: str = "g"
    gamma_grid: tuple = (0.2, 2.0, 5.0, 7.0, 10.0)
    # output
    out_dir: str = "."
    format: str = "csv"

    def system_params(self, **changes) -> SystemParams:
        """SystemParams with omega - omega_1 locked to g_f."""
        base = SystemParams(g=self.g, gamma=self.gamma, detuning1=self.g_f,
                            delta=self.g_f * (2.0 + np.sqrt(2.0)), e1=self.e1, e2=self.e2,
                            n_max=self.n_max)
        return replace(base, **changes)

    def delta_tilde_grid(self) -> np.ndarray:
        n = int(np.floor((self.delta_tilde_max - self.delta_tilde_min) / self.delta_tilde_step + 1e-9))
        return np.round(self.delta_tilde_min + self.delta_tilde_step * np.arange(n + 1), 12)

    def g_grid(self) -> np.ndarray:
        n = int(np.floor((self.g_grid_max - self.g_grid_min) / self.g_grid_step + 1e-9))
        return np.round(self.g_grid_min + self.g_grid_step * np.arange(n + 1), 12)

    def tau_w_grid(self) -> np.ndarray:
        return np.geomspace(self.tau_w_min, self.tau_w_max, self.tau_w_count)

    def as_dict(self, include_location: bool = True) -> dict:
        d = asdict(self)
        d["gamma_grid"] = list(self.gamma_grid)
        if not include_location:
            for key in LOCATION_KEYS:
                d.pop(key)
        return d


#: Keys that say where results go rather than what they are; left out of
#: embedded configs so that outputs do not depend on the output path.
LOCATION_KEYS = ("out_dir",)

_CHECKS = {
    "g_f": _positive, "g": _non_negative, "gamma": _non_negative, "e1": _non_negative,
    "e2": _non_negative, "n_max": _at_least(1), "density": _choice("ensemble", "point"),
    "mask": _choice("masked", "unmasked"), "mask_width": _non_negative, "g_max": _positive,
    "f_cut": _open_unit, "samples": _at_least(10**4), "bins": _at_least(2), "nodes": _at_least(1),
    "seed": _seed, "n_b": _at_least(1), "tol": _positive, "tau_w": _positive,
    "delta_tilde_step": _positive, "g_grid_min": _positive, "g_grid_step": _positive,
    "tau_w_min": _positive, "tau_w_max": _positive, "tau_w_count": _at_least(2),
    "tau_lo": _positive, "tau_hi": _positive, "tau_tol": _positive,
    "opt_axis": _choice("g", "gamma"), "gamma_grid": _positive_list, "format": _choice("csv", "json"),
}

_TYPES = {f.name: type(f.default) for f in fields(RunConfig)}


def _convert(key: str, raw: str):
    kind = _TYPES[key]
    if kind is bool:
        low = raw.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ValueError("expected true or false")
    if kind is int:
        return int(raw)
    if kind is float:
        value = float(raw)
        if not np.isfinite(value):
            raise ValueError("expected a finite number")
        return value
    if kind is tuple:
        return tuple(float(x) for x in raw.split(",") if x.strip())
    return raw


def validate(config: RunConfig) -> RunConfig:
    for key, check in _CHECKS.items():
        try:
            check(getattr(config, key))
        except ValueError as exc:
            raise ConfigError(f"{key} {exc}", key=key) from None
    pairs = (("delta_tilde_min", "delta_tilde_max"), ("g_grid_min", "g_grid_max"),
             ("tau_w_min", "tau_w_max"), ("tau_lo", "tau_hi"))
    for lo, hi in pairs:
        if getattr(config, lo) >= getattr(config, hi):
            raise ConfigError(f"{lo} must be below {hi}", key=lo)
    return config


def parse_config(source: str, **overrides) -> RunConfig:
    """Parse flat key-value text; unspecified keys take their defaults."""
    values, seen = {}, {}
    for lineno, line in enumerate(source.splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"expected 'key = value', got {text!r}", line=lineno)
        key, raw = (part.strip() for part in text.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"unknown key {key!r}", key=key, line=lineno)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (first on line {seen[key]})", key=key, line=lineno)
        try:
            values[key] = _convert(key, raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}", key=key, line=lineno) from None
        seen[key] = lineno
        try:
            if key in _CHECKS:
                _CHECKS[key](values[key])
        except ValueError as exc:
            raise ConfigError(f"{key} {exc}", key=key, line=lineno) from None
    values.update({k: v for k, v in overrides.items() if v is not None})
    return validate(RunConfig(**values))


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def echo_config(config: RunConfig, include_location: bool = True) -> str:
    """Full effective configuration as parseable text."""
    return "".join(f"{f.name} = {_format(getattr(config, f.name))}\n" for f in fields(config)
                   if include_location or f.name not in LOCATION_KEYS)
