"""Sectioned key-value run configuration.

A run file has the sections ``[model]``, ``[grid]``, ``[stepper]``,
``[diagnostics]``, ``[initial]`` and ``[output]``; sweep files add ``[sweep]``.
Every section is optional and falls back to the defaults below.  Unknown
sections or keys are rejected so that typos surface immediately::

    [model]
    system = may_nowak_chemotaxis
    kappa = 1.0
    conversion = saturated
    alpha = 0.5

    [grid]
    geometry = interval
    lengths = 1.0
    cells = 64

    [stepper]
    t_end = 50
    dt_max = 0.01

    [diagnostics]
    sample_interval = 0.5
"""

from __future__ import annotations

import configparser
import dataclasses
from enum import Enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

from .experiments import RunSetup, SweepSpec
from .grid import GridError, GridSpec
from .initial_data import InitialData
from .models import ConversionKind, ConversionSpec, ModelError, ModelSpec
from .stepper import StepperConfig


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending section and key."""


@dataclass(frozen=True)
class OutputOptions:
    directory: Optional[str] = None
    snapshots: bool = False
    plots: bool = True


@dataclass(frozen=True)
class SweepOptions:
    alpha_values: tuple[float, ...] = (0.5, 1.0, 1.5, 1.9)
    kappa_values: tuple[float, ...] = (1.0,)
    seeds: tuple[int, ...] = (0,)
    conversion: Optional[ConversionKind] = None
    workers: int = 1
    critical_bracket: Optional[tuple[float, float]] = None
    critical_iterations: int = 4


@dataclass(frozen=True)
class RunConfig:
    setup: RunSetup
    output: OutputOptions = field(default_factory=OutputOptions)
    sweep: Optional[SweepOptions] = None

    def sweep_spec(self) -> SweepSpec:
        opts = self.sweep or SweepOptions()
        return SweepSpec(self.setup, opts.alpha_values, opts.kappa_values, opts.seeds, opts.conversion)


def _floats(text: str) -> tuple[float, ...]:
    parts = [p.strip() for p in str(text).split(",") if p.strip()]
    if not parts:
        raise ValueError("empty list")
    return tuple(float(p) for p in parts)


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(p) for p in _floats_as_int_strings(text))


def _floats_as_int_strings(text: str) -> list[str]:
    parts = [p.strip() for p in str(text).split(",") if p.strip()]
    if not parts:
        raise ValueError("empty list")
    return parts


def _bool(text: str) -> bool:
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional(conv: Callable[[str], Any]) -> Callable[[str], Any]:
    def parse(text: str):
        if str(text).strip().lower() in ("", "none", "default"):
            return None
        return conv(text)

    return parse


def _table(text: str) -> tuple[tuple[float, float], ...]:
    pairs = []
    for item in str(text).split(","):
        if not item.strip():
            continue
        s, _, y = item.partition(":")
        pairs.append((float(s), float(y)))
    return tuple(pairs)


def _pair(text: str) -> tuple[float, float]:
    values = _floats(text)
    if len(values) != 2:
        raise ValueError("expected two comma-separated numbers")
    return values


_MODEL_KEYS = {
    "system": str,
    "D1": float,
    "D2": float,
    "D3": float,
    "chi": float,
    "d1": float,
    "d2": float,
    "d3": float,
    "r": float,
    "kappa": float,
    "conversion": str,
    "alpha": float,
    "K_f": float,
    "table": _table,
}
_GRID_KEYS = {"geometry": str, "lengths": _floats, "cells": _ints}
_STEPPER_KEYS = {
    "t_end": float,
    "dt_init": float,
    "dt_min": float,
    "dt_max": float,
    "cfl_safety": float,
    "scheme": str,
    "blowup_threshold": float,
}
_DIAG_KEYS = {"sample_interval": _optional(float), "q": _optional(float)}
_INITIAL_KEYS = {
    "family": str,
    "seed": int,
    "mean_u": float,
    "mean_v": float,
    "mean_w": float,
    "amplitude": float,
    "modes": int,
    "mass": float,
    "width": float,
}
_OUTPUT_KEYS = {"directory": _optional(str), "snapshots": _bool, "plots": _bool}
_SWEEP_KEYS = {
    "alpha_values": _floats,
    "kappa_values": _floats,
    "seeds": _ints,
    "conversion": _optional(str),
    "workers": int,
    "critical_bracket": _optional(_pair),
    "critical_iterations": int,
}
SECTIONS = {
    "model": _MODEL_KEYS,
    "grid": _GRID_KEYS,
    "stepper": _STEPPER_KEYS,
    "diagnostics": _DIAG_KEYS,
    "initial": _INITIAL_KEYS,
    "output": _OUTPUT_KEYS,
    "sweep": _SWEEP_KEYS,
}


def _typed_section(name: str, raw: dict) -> dict:
    schema = SECTIONS[name]
    lookup = {k.lower(): k for k in schema}
    out = {}
    for key, value in raw.items():
        canonical = lookup.get(key.lower())
        if canonical is None:
            raise ConfigError(f"[{name}] unknown key '{key}'")
        if value is None:
            continue
        try:
            out[canonical] = schema[canonical](value) if isinstance(value, str) else _coerce(schema[canonical], value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{name}] {canonical}: {exc}") from None
    return out


def _coerce(conv, value):
    """Accept already-typed values (from a JSON echo) as well as strings."""
    if isinstance(value, (list, tuple)):
        if value and isinstance(value[0], (list, tuple)):
            return tuple(tuple(float(x) for x in p) for p in value)
        return conv(",".join(str(v) for v in value))
    return conv(str(value))


def config_from_dict(data: dict) -> RunConfig:
    """Build a :class:`RunConfig` from ``{section: {key: value}}``."""
    for section in data:
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
    sec = {name: _typed_section(name, dict(data.get(name) or {})) for name in SECTIONS}

    try:
        m = dict(sec["model"])
        kind = m.pop("conversion", "identity")
        conv = ConversionSpec(
            kind,
            m.pop("alpha", 1.0),
            m.pop("K_f", 1.0),
            m.pop("table", ()),
        )
        model = ModelSpec(conversion=conv, **m)
    except (ModelError, ValueError) as exc:
        raise ConfigError(f"[model] {exc}") from None

    try:
        g = sec["grid"]
        geometry = g.get("geometry", "interval")
        default_dims = 2 if geometry == "rectangle" else 1
        lengths = g.get("lengths", (1.0,) * default_dims)
        cells = g.get("cells", (64,) * default_dims)
        if geometry == "rectangle" and len(cells) == 1:
            cells = cells * 2
        grid = GridSpec(geometry, lengths, cells)
    except (GridError, ValueError) as exc:
        raise ConfigError(f"[grid] {exc}") from None

    try:
        stepper = StepperConfig(**sec["stepper"])
    except ValueError as exc:
        raise ConfigError(f"[stepper] {exc}") from None

    init = dict(sec["initial"])
    seed = init.pop("seed", 0)
    try:
        initial = InitialData(**init)
    except ValueError as exc:
        raise ConfigError(f"[initial] {exc}") from None

    diag = sec["diagnostics"]
    q = diag.get("q")
    if q is not None and not q > 1.0:
        raise ConfigError("[diagnostics] q: must exceed 1")
    sample = diag.get("sample_interval")
    if sample is not None and not sample > 0.0:
        raise ConfigError("[diagnostics] sample_interval: must be positive")

    setup = RunSetup(model, grid, stepper, initial, seed, q, sample)
    output = OutputOptions(**sec["output"])
    sweep = None
    if data.get("sweep") is not None:
        s = dict(sec["sweep"])
        if s.get("conversion") in (None, "prototype"):
            s["conversion"] = None
        else:
            try:
                s["conversion"] = ConversionKind(s["conversion"])
            except ValueError as exc:
                raise ConfigError(f"[sweep] conversion: {exc}") from None
        sweep = SweepOptions(**s)
    return RunConfig(setup, output, sweep)


def load_config(path: str | Path) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict({s: dict(parser.items(s)) for s in parser.sections()})


def _plain(value):
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value


def config_to_dict(cfg: RunConfig) -> dict:
    """Inverse of :func:`config_from_dict`, with a fixed section and key order."""
    s = cfg.setup
    m = s.model
    model = {
        "system": m.system.value,
        "D1": m.D1,
        "D2": m.D2,
        "D3": m.D3,
        "chi": m.chi,
        "d1": m.d1,
        "d2": m.d2,
        "d3": m.d3,
        "r": m.r,
        "kappa": m.kappa,
        "conversion": m.conversion.kind.value,
        "alpha": m.conversion.alpha,
        "K_f": m.conversion.K_f,
    }
    if m.conversion.table:
        model["table"] = [list(p) for p in m.conversion.table]
    out = {
        "model": model,
        "grid": {
            "geometry": s.grid.geometry.value,
            "lengths": list(s.grid.lengths),
            "cells": list(s.grid.cells),
        },
        "stepper": {
            f.name: _plain(getattr(s.stepper, f.name)) for f in dataclasses.fields(s.stepper)
        },
        "diagnostics": {"sample_interval": s.sample_interval, "q": s.q},
        "initial": {"family": s.initial.family.value, "seed": s.seed}
        | {f.name: getattr(s.initial, f.name) for f in dataclasses.fields(s.initial) if f.name != "family"},
        "output": {
            "directory": cfg.output.directory,
            "snapshots": cfg.output.snapshots,
            "plots": cfg.output.plots,
        },
    }
    if cfg.sweep is not None:
        sw = cfg.sweep
        out["sweep"] = {
            "alpha_values": list(sw.alpha_values),
            "kappa_values": list(sw.kappa_values),
            "seeds": list(sw.seeds),
            "conversion": sw.conversion.value if sw.conversion else "prototype",
            "workers": sw.workers,
            "critical_bracket": list(sw.critical_bracket) if sw.critical_bracket else None,
            "critical_iterations": sw.critical_iterations,
        }
    return out


def config_to_ini(cfg: RunConfig) -> str:
    """Render a config as an INI file that :func:`load_config` reads back."""
    lines = []
    for section, values in config_to_dict(cfg).items():
        lines.append(f"[{section}]")
        for key, value in values.items():
            if value is None:
                text = "none"
            elif key == "table":
                text = ", ".join(f"{a!r}:{b!r}" for a, b in value)
            elif isinstance(value, list):
                text = ", ".join(repr(v) for v in value)
            elif isinstance(value, bool):
                text = "true" if value else "false"
            else:
                text = repr(value) if isinstance(value, float) else str(value)
            lines.append(f"{key} = {text}")
        lines.append("")
    return "\n".join(lines)
