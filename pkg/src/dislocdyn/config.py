"""Strict ``key = value`` configuration with ``[section]`` blocks.

Grammar: top-level keys (``model``, ``seed``, ``output_dir``) come before any
section header; ``[material]``, ``[time]`` and the block named after the model
follow. ``#`` starts a comment. Every problem is collected before reporting.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from typing import Any, Callable

from .elasticity import derive_constants
from .errors import ConfigError, ValidationError

MODELS = ("micro2d", "gb2d", "sub1d", "gcz1d", "curves")
ROOT = "__root__"
REQUIRED = object()


@dataclass(frozen=True)
class Key:
    kind: type
    default: Any = REQUIRED
    check: Callable[[Any], bool] | None = None
    rule: str = ""
    choices: tuple[str, ...] | None = None


def _pos(x):
    return x > 0


def _nonneg(x):
    return x >= 0


def _unit(x):
    return 0 < x <= 1


POS, NONNEG, UNIT = (_pos, "> 0"), (_nonneg, ">= 0"), (_unit, "in (0, 1]")


def key(kind, default=REQUIRED, check=None, choices=None):
    fn, rule = check if check else (None, "")
    return Key(kind, default, fn, rule, choices)


ROOT_SCHEMA = {
    "model": key(str, choices=MODELS),
    "seed": key(int, 0, NONNEG),
    "output_dir": key(str, "output"),
}

MATERIAL_SCHEMA = {"lambda": key(float, 1.0), "mu": key(float, 1.0)}

TIME_SCHEMA = {
    "micro2d": {"dt": key(float, 1e-4, POS), "n_steps": key(int, 100, POS), "snapshot_every": key(int, 10, POS)},
    "gb2d": {"cfl": key(float, 0.5, UNIT), "n_steps": key(int, 200, POS), "snapshot_every": key(int, 50, POS)},
    "sub1d": {"cfl": key(float, 0.9, UNIT), "t_max": key(float, 0.5, POS), "snapshot_every": key(int, 10, POS)},
    "gcz1d": {"dt": key(float, None, POS), "t_max": key(float, 50.0, POS), "snapshot_every": key(int, 10000, POS)},
    "curves": {"dt": key(float, 0.01, POS), "t_max": key(float, 1.0, POS), "snapshot_every": key(int, 10, POS)},
}

MODEL_SCHEMA = {
    "micro2d": {
        "n_plus": key(int, 8, NONNEG),
        "n_minus": key(int, 8, NONNEG),
        "min_separation": key(float, 1e-6, POS),
    },
    "gb2d": {
        "n1": key(int, 64, POS),
        "n2": key(int, 64, POS),
        "L": key(float, 1.0, POS),
        "amplitude": key(float, 0.5, (lambda x: 0 <= x < 1, "in [0, 1)")),
        "max_mode": key(int, 4, POS),
    },
    "sub1d": {
        "n": key(int, 128, (lambda x: x >= 2, ">= 2")),
        "L": key(float, 1.0, POS),
        "c2_override": key(float, None),
        "forcing_amplitude": key(float, 0.0),
        "forcing_period": key(float, 1.0, POS),
    },
    "gcz1d": {
        "n": key(int, 200, POS),
        "epsilon": key(float, 0.1, POS),
        "tau": key(float, 0.5),
        "c0": key(float, 1.0, POS),
        "D0": key(float, 1.0, POS),
        "residual_tol": key(float, 1e-6, NONNEG),
        "initial": key(str, "bump", choices=("bump", "linear")),
        "background": key(float, 0.25, (lambda x: 0 < x < 0.5, "in (0, 0.5)")),
        "center": key(float, 0.4, (lambda x: abs(x) < 1, "in (-1, 1)")),
        "width": key(float, 0.1, POS),
        "monitor_gamma": key(float, 0.0, NONNEG),
    },
    "curves": {
        "shape": key(str, "circle", choices=("circle", "ellipse")),
        "radius": key(float, 1.0, POS),
        "semi_axis_x": key(float, 1.5, POS),
        "semi_axis_y": key(float, 1.0, POS),
        "vertices": key(int, 256, (lambda x: x >= 8, ">= 8")),
        "velocity": key(str, "constant", choices=("constant", "linear", "quadratic")),
        "c0": key(float, 1.0),
        "grad_x": key(float, 0.0),
        "grad_y": key(float, 0.0),
        "hess_xx": key(float, 0.0),
        "hess_xy": key(float, 0.0),
        "hess_yy": key(float, 0.0),
        "redistribute": key(bool, False),
    },
}


@dataclass(frozen=True)
class SimConfig:
    """Effective configuration with every default expanded."""

    model: str
    seed: int
    output_dir: str
    material: dict[str, float]
    time: dict[str, Any]
    params: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "model": self.model,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "material": dict(self.material),
            "time": dict(self.time),
            self.model: dict(self.params),
        }


def _convert(raw: str, spec: Key, path: str, errors: list[str]):
    text = raw.strip()
    try:
        if spec.kind is bool:
            low = text.lower()
            if low not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError
            value = low in ("true", "yes", "1")
        elif spec.kind is int:
            value = int(text)
        elif spec.kind is float:
            value = float(text)
            if not math.isfinite(value):
                raise ValueError
        else:
            value = text
    except ValueError:
        errors.append(f"{path}: expected {spec.kind.__name__}, got {text!r}")
        return None
    if spec.choices and value not in spec.choices:
        errors.append(f"{path}: must be one of {', '.join(spec.choices)}, got {value!r}")
        return None
    if spec.check and not spec.check(value):
        errors.append(f"{path}: must be {spec.rule}, got {value!r}")
        return None
    return value


def _read_section(name: str, items: dict[str, str], schema: dict[str, Key], errors: list[str]) -> dict[str, Any]:
    out = {}
    prefix = "" if name == ROOT else f"{name}."
    for k in items:
        if k not in schema:
            errors.append(f"{prefix}{k}: unknown key")
    for k, spec in schema.items():
        if k in items:
            out[k] = _convert(items[k], spec, prefix + k, errors)
        elif spec.default is REQUIRED:
            errors.append(f"{prefix}{k}: missing required key")
        else:
            out[k] = spec.default
    return out


def parse_config(text: str) -> SimConfig:
    """Parse and validate; raises :class:`ConfigError` listing every problem."""
    parser = configparser.ConfigParser(
        interpolation=None, comment_prefixes=("#",), inline_comment_prefixes=("#",), delimiters=("=",), strict=True
    )
    parser.optionxform = str  # keys are case sensitive
    try:
        parser.read_string(f"[{ROOT}]\n" + text)
    except configparser.Error as exc:
        raise ConfigError([f"syntax: {exc.message.replace(f'[{ROOT}]', 'top level').strip()}"]) from exc
    errors: list[str] = []
    root = _read_section(ROOT, dict(parser[ROOT]), ROOT_SCHEMA, errors)
    model = root.get("model")
    sections = {s: dict(parser[s]) for s in parser.sections() if s != ROOT}
    for s in sections:
        if s in ("material", "time"):
            continue
        if s in MODELS:
            if model in MODELS and s != model:
                errors.append(f"{s}: section does not apply to model {model}")
        else:
            errors.append(f"{s}: unknown section")
    material = _read_section("material", sections.get("material", {}), MATERIAL_SCHEMA, errors)
    if material.get("lambda") is not None and material.get("mu") is not None:
        try:
            derive_constants(material["lambda"], material["mu"])
        except ValidationError as exc:
            errors.append(f"material: {exc}")
    if model not in MODELS:
        raise ConfigError(errors)
    time = _read_section("time", sections.get("time", {}), TIME_SCHEMA[model], errors)
    params = _read_section(model, sections.get(model, {}), MODEL_SCHEMA[model], errors)
    if not errors:
        _cross_checks(model, time, params, errors)
    if errors:
        raise ConfigError(errors)
    return SimConfig(model, root["seed"], root["output_dir"], material, time, params)


def _cross_checks(model: str, time: dict, params: dict, errors: list[str]) -> None:
    """Preconditions that involve several keys; fills derived defaults in place."""
    if model == "gcz1d":
        from .gcz1d import default_dt

        n, eps, d0 = params["n"], params["epsilon"], params["D0"]
        limit = (2.0 / (n + 1)) ** 2 / (2.0 * (d0 + eps))
        if time["dt"] is None:
            time["dt"] = default_dt(n, eps, d0)
        elif time["dt"] > limit:
            errors.append(f"time.dt: must be <= dy^2/(2(D0+epsilon)) = {limit:.6g}, got {time['dt']!r}")
    elif model == "curves":
        if params["shape"] == "circle" and params["velocity"] == "constant" and params["c0"] < 0:
            if params["radius"] + params["c0"] * time["t_max"] <= 0:
                errors.append("curves.c0: the circle would collapse before t_max")
    elif model == "micro2d":
        if params["n_plus"] + params["n_minus"] == 0:
            errors.append("micro2d.n_plus: at least one particle is required")


def load_config(path) -> SimConfig:
    with open(path) as fh:
        return parse_config(fh.read())
