"""Experiment configuration: JSON schema, defaults and validation."""

from __future__ import annotations

import copy
import math

import jsonschema

from .linalg import ValidationError

KINDS = ("verify", "clock", "switch", "tightness", "theorem2")
CLOCK_NAMES = ("rabi", "circle", "relaxation", "spin")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_posint = {"type": "integer", "minimum": 1}
_opt_pos = {"type": ["number", "null"], "exclusiveMinimum": 0}
_matrix = {"type": "array", "items": {"type": "array", "items": {
    "type": "array", "items": _num, "minItems": 2, "maxItems": 2}}}

_clock_params = {
    "name": {"enum": list(CLOCK_NAMES)},
    "bandwidth": _pos,
    "k": _posint,
    "n_sectors": {"type": "integer", "minimum": 2},
    "rate": _pos,
    "horizon": _opt_pos,
    "delta_alpha": _opt_pos,
}

PARAMS_SCHEMA = {
    "verify": {
        "instances": _posint,
        "min_dim": {"type": "integer", "minimum": 2},
        "max_dim": {"type": "integer", "minimum": 2, "maximum": 8},
        "times_per_instance": _posint,
    },
    "clock": dict(_clock_params, delta_t=_opt_pos, csv_points={"type": "integer", "minimum": 2},
                  method={"enum": ["auto", "dense", "pure"]}),
    "switch": {
        "bandwidth": _pos,
        "rates": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "horizon": _pos,
        "grid_points": {"type": "integer", "minimum": 3},
    },
    "tightness": {
        "clock": {"type": "object", "properties": _clock_params, "required": ["name"],
                  "additionalProperties": False},
        "delta_t": _pos,
        "restarts": _posint,
        "max_iterations": _posint,
        "initial_step": _pos,
        "init_scale": _pos,
        "penalty_weight": _pos,
        "escalations": {"type": "integer", "minimum": 0},
        "base_partition": {"type": ["array", "null"], "items": _posint},
    },
    "theorem2": {
        "bandwidth": _pos,
        "apparatus_scale": _num,
        "gamma": {"anyOf": [{"enum": ["ground"]}, _matrix]},
        "h_hat": {"anyOf": [{"enum": ["diag01"]}, _matrix]},
        "u": {"anyOf": [{"enum": ["cnot", "identity"]}, _matrix]},
        "delta_t": _opt_pos,
    },
}

DEFAULT_PARAMS = {
    "verify": {"instances": 500, "min_dim": 2, "max_dim": 8, "times_per_instance": 10},
    "clock": {"name": "circle", "k": 16, "n_sectors": 4, "bandwidth": 1.0, "rate": 1.0, "horizon": None,
              "delta_alpha": None, "delta_t": None, "csv_points": 201, "method": "auto"},
    "switch": {"bandwidth": 1.0, "rates": [0.0, 0.001, 0.01, 0.1, 1.0, 10.0, 100.0],
               "horizon": 10 * math.pi, "grid_points": 4001},
    "tightness": {"clock": {"name": "rabi", "bandwidth": 1.0}, "delta_t": math.pi, "restarts": 4,
                  "max_iterations": 200, "initial_step": 0.5, "init_scale": 1.0, "penalty_weight": 1e3,
                  "escalations": 2, "base_partition": None},
    "theorem2": {"bandwidth": 1.0, "apparatus_scale": 1.0, "gamma": "ground", "h_hat": "diag01", "u": "cnot",
                 "delta_t": None},
}

DEFAULT_GRIDS = {"resolution_points": 2049, "quadrature_points": 257}
DEFAULT_TOLERANCES = {"violation": 1e-8, "occupation": 1e-12, "quadrature_rtol": 1e-6}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": list(KINDS)},
        "seed": {"type": "integer", "minimum": 0},
        "params": {"type": "object"},
        "grids": {"type": "object", "additionalProperties": False, "properties": {
            "resolution_points": {"type": "integer", "minimum": 3},
            "quadrature_points": {"type": "integer", "minimum": 9},
        }},
        "tolerances": {"type": "object", "additionalProperties": False, "properties": {
            "violation": _pos, "occupation": _pos, "quadrature_rtol": _pos,
        }},
        "output": {"type": "object", "additionalProperties": False, "properties": {
            "dir": {"type": "string"},
        }},
    },
    "required": ["kind"],
}


class ConfigError(ValidationError):
    """Schema violation; the message starts with the offending field path."""


def _path(error) -> str:
    return "/".join(str(p) for p in error.absolute_path) or "<root>"


def _validate(instance, schema, prefix: str):
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(instance), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        path = "/".join(filter(None, [prefix, _path(e) if e.absolute_path else ""])) or "<root>"
        raise ConfigError(f"{path}: {e.message}")


def materialize(raw: dict) -> dict:
    """Validate ``raw`` and return a full config with every default filled in."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>: config must be a JSON object")
    _validate(raw, CONFIG_SCHEMA, "")
    kind = raw["kind"]
    params_schema = {"type": "object", "additionalProperties": False, "properties": PARAMS_SCHEMA[kind]}
    params = raw.get("params", {})
    _validate(params, params_schema, "params")
    full_params = copy.deepcopy(DEFAULT_PARAMS[kind])
    full_params.update(copy.deepcopy(params))
    return {
        "kind": kind,
        "seed": raw.get("seed", 0),
        "params": full_params,
        "grids": {**DEFAULT_GRIDS, **raw.get("grids", {})},
        "tolerances": {**DEFAULT_TOLERANCES, **raw.get("tolerances", {})},
        "output": {"dir": "out", **raw.get("output", {})},
    }
