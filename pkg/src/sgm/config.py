"""Experiment configuration: JSON schema, presets and normalization.

A config file is a JSON object.  If it names a ``preset`` the preset is
deep-merged underneath the explicit keys.  :func:`normalize` fills every
default so that ``parse(emit(normalize(c))) == normalize(c)``.
"""

from __future__ import annotations

import copy
import json
import math
from pathlib import Path

import jsonschema
import numpy as np

from . import fields as F

_num = {"type": "number"}
_vec3 = {"type": "array", "items": _num, "minItems": 3, "maxItems": 3}
_vec2 = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}
_mode = {
    "type": "object",
    "properties": {"kx": {"type": "integer"}, "ky": {"type": "integer"}, "amp": _num, "phase": _num},
    "required": ["kx", "ky", "amp"],
    "additionalProperties": False,
}
_field_spec = {"oneOf": [{"type": "array", "items": _mode}, {"type": "string"}, {"type": "null"}]}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "sgm experiment config",
    "type": "object",
    "properties": {
        "preset": {"type": "string"},
        "realization": {"enum": ["rigid_body", "heavy_top", "euler2d"]},
        "model": {
            "type": "object",
            "properties": {
                "inertia": _vec3,
                "mgl": _num,
                "chi": _vec3,
                "gravity": _num,
            },
            "additionalProperties": False,
        },
        "grid": {
            "type": "object",
            "properties": {
                "nx": {"type": "integer"},
                "ny": {"type": "integer"},
                "Lx": _num,
                "Ly": _num,
            },
            "additionalProperties": False,
        },
        "initial": {
            "type": "object",
            "properties": {
                "m": _vec3,
                "a": _vec3,
                "vorticity": _field_spec,
                "buoyancy": _field_spec,
            },
            "additionalProperties": False,
        },
        "noise": {
            "type": "object",
            "properties": {
                "xis": {
                    "type": "array",
                    "items": {"oneOf": [_vec3, {"type": "string"}, {"type": "array", "items": _mode}]},
                },
                "amplitude": _num,
            },
            "additionalProperties": False,
        },
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "T": {"type": "number", "exclusiveMinimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "ensemble": {"type": "integer", "minimum": 1},
        "save_every": {"type": "integer", "minimum": 1},
        "loop": {
            "oneOf": [
                {"type": "null"},
                {
                    "type": "object",
                    "properties": {
                        "center": _vec2,
                        "radius": {"type": "number", "exclusiveMinimum": 0},
                        "n": {"type": "integer", "minimum": 16},
                    },
                    "additionalProperties": False,
                },
            ]
        },
        "output": {"type": "string"},
        "tolerances": {
            "type": "object",
            "properties": {
                "fixed_point": {"type": "number", "exclusiveMinimum": 0},
                "cfl_mode": {"enum": ["error", "warn", "off"]},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


class ConfigError(ValueError):
    pass


_sinsin = [{"kx": 1, "ky": -1, "amp": 0.5, "phase": 0.0}, {"kx": 1, "ky": 1, "amp": -0.5, "phase": 0.0}]
_flow_noise = [
    [{"kx": 1, "ky": 2, "amp": 0.15, "phase": 0.0}],
    [{"kx": 2, "ky": -1, "amp": 0.15, "phase": -math.pi / 2}],
]

PRESETS = {
    "rigid_body": {
        "realization": "rigid_body",
        "model": {"inertia": [1.0, 2.0, 3.0]},
        "initial": {"m": [1.0, 0.5, -0.3]},
        "noise": {"xis": [], "amplitude": 1.0},
        "dt": 1e-3,
        "T": 10.0,
        "save_every": 100,
    },
    "heavy_top": {
        "realization": "heavy_top",
        "model": {"inertia": [1.0, 2.0, 3.0], "mgl": 1.0, "chi": [0.0, 0.0, 1.0]},
        "initial": {"m": [1.0, 0.5, -0.3], "a": [0.1, 0.2, 1.0]},
        "noise": {"xis": [[0.3, 0.0, 1.0]], "amplitude": 1.0},
        "dt": 1e-3,
        "T": 10.0,
        "save_every": 100,
    },
    "euler2d_kelvin": {
        "realization": "euler2d",
        "model": {"gravity": 0.0},
        "grid": {"nx": 64, "ny": 64},
        "initial": {
            "vorticity": _sinsin + [{"kx": 2, "ky": 1, "amp": 0.4, "phase": 0.0}],
            "buoyancy": None,
        },
        "noise": {"xis": _flow_noise, "amplitude": 1.0},
        "dt": 5e-4,
        "T": 1.0,
        "save_every": 200,
        "loop": {"center": [math.pi / 2, math.pi / 2], "radius": 0.8, "n": 256},
    },
    "boussinesq_budget": {
        "realization": "euler2d",
        "model": {"gravity": 2.0},
        "grid": {"nx": 64, "ny": 64},
        "initial": {
            "vorticity": _sinsin + [{"kx": 2, "ky": 1, "amp": 0.4, "phase": 0.0}],
            "buoyancy": [
                {"kx": 1, "ky": 0, "amp": 1.0, "phase": -0.3},
                {"kx": 1, "ky": 1, "amp": 0.5, "phase": -math.pi / 2},
            ],
        },
        "noise": {"xis": _flow_noise, "amplitude": 1.0},
        "dt": 5e-4,
        "T": 0.5,
        "save_every": 200,
        "loop": {"center": [math.pi / 2, math.pi / 2], "radius": 0.8, "n": 256},
    },
}

_COMMON = {
    "seed": 0,
    "ensemble": 1,
    "output": "out",
    "tolerances": {"fixed_point": 1e-12, "cfl_mode": "error"},
}

_BY_REALIZATION = {
    "rigid_body": {
        "model": {"inertia": [1.0, 1.0, 1.0]},
        "initial": {"m": [1.0, 0.0, 0.0]},
        "noise": {"xis": [], "amplitude": 1.0},
        "save_every": 1,
        "loop": None,
    },
    "heavy_top": {
        "model": {"inertia": [1.0, 1.0, 1.0], "mgl": 1.0, "chi": [0.0, 0.0, 1.0]},
        "initial": {"m": [1.0, 0.0, 0.0], "a": [0.0, 0.0, 1.0]},
        "noise": {"xis": [], "amplitude": 1.0},
        "save_every": 1,
        "loop": None,
    },
    "euler2d": {
        "model": {"gravity": 0.0},
        "grid": {"nx": 32, "ny": 32, "Lx": 2 * math.pi, "Ly": 2 * math.pi},
        "initial": {"vorticity": _sinsin, "buoyancy": None},
        "noise": {"xis": [], "amplitude": 1.0},
        "save_every": 1,
        "loop": None,
    },
}


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _validate_schema(cfg):
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None


def normalize(raw, base_dir=None):
    """Merge preset and defaults, validate, and return a fully explicit dict."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    _validate_schema(raw)
    cfg = copy.deepcopy(raw)
    if "preset" in cfg:
        if cfg["preset"] not in PRESETS:
            raise ConfigError(f"unknown preset {cfg['preset']!r}; choose from {sorted(PRESETS)}")
        cfg = _merge(PRESETS[cfg["preset"]], cfg)
    if "realization" not in cfg:
        raise ConfigError("config needs 'realization' or a 'preset'")
    for key in ("dt", "T"):
        if key not in cfg:
            raise ConfigError(f"config needs {key!r}")
    cfg = _merge(_merge(_COMMON, _BY_REALIZATION[cfg["realization"]]), cfg)
    if cfg["realization"] != "euler2d":
        cfg.pop("grid", None)
    _validate_schema(cfg)
    _check_semantics(cfg, base_dir)
    return cfg


def _check_semantics(cfg, base_dir):
    dt, T = cfg["dt"], cfg["T"]
    if T < dt:
        raise ConfigError(f"T={T} must be at least dt={dt}")
    n = round(T / dt)
    if abs(n * dt - T) > 1e-9 * T:
        raise ConfigError(f"T={T} is not a whole number of steps of dt={dt}")
    real = cfg["realization"]
    if real != "euler2d":
        if any(x <= 0 for x in cfg["model"]["inertia"]):
            raise ConfigError("inertia entries must be positive")
        for xi in cfg["noise"]["xis"]:
            if not (isinstance(xi, list) and len(xi) == 3 and all(isinstance(c, (int, float)) for c in xi)):
                raise ConfigError("finite-dimensional noise fields must be 3-vectors")
        if real == "heavy_top" and "a" not in cfg["initial"]:
            raise ConfigError("heavy_top needs initial 'a'")
        return
    g = cfg["grid"]
    try:
        F.Grid2D(g["nx"], g["ny"], g["Lx"], g["Ly"])
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None
    refs = [cfg["initial"]["vorticity"], cfg["initial"]["buoyancy"]] + list(cfg["noise"]["xis"])
    for ref in refs:
        if isinstance(ref, str):
            p = resolve_path(ref, base_dir)
            if not p.is_file():
                raise ConfigError(f"referenced field file not found: {p}")
        elif isinstance(ref, list) and ref and not isinstance(ref[0], dict):
            raise ConfigError("euler2d noise fields must be SGMF paths or stream-function mode lists")
    if cfg["initial"]["vorticity"] is None:
        raise ConfigError("euler2d needs an initial vorticity")
    if cfg["model"]["gravity"] != 0 and cfg["initial"]["buoyancy"] is None:
        raise ConfigError("nonzero gravity needs an initial buoyancy")


def resolve_path(ref, base_dir=None):
    p = Path(ref)
    if not p.is_absolute() and base_dir is not None:
        p = Path(base_dir) / p
    return p


def emit(cfg):
    return json.dumps(cfg, indent=2, sort_keys=True) + "\n"


def parse(text, base_dir=None):
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return normalize(raw, base_dir)


def load(path):
    path = Path(path)
    if not path.is_file():
        if path.suffix == "" and str(path) in PRESETS:
            return normalize({"preset": str(path)})
        raise ConfigError(f"config file not found: {path}")
    return parse(path.read_text(), base_dir=path.parent)


def modes_to_array(modes, grid):
    """``sum amp cos(kx x + ky y + phase)`` with integer wavenumbers on the torus."""
    X, Y = grid.coords
    out = np.zeros(grid.shape)
    for md in modes:
        ph = 2 * np.pi * (md["kx"] * X / grid.Lx + md["ky"] * Y / grid.Ly) + md.get("phase", 0.0)
        out = out + md["amp"] * np.cos(ph)
    return out
