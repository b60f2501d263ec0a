"""Scenario JSON loading and validation."""

from __future__ import annotations

import json
from dataclasses import fields

import jsonschema

from .backend import BackendCoefficients, Scenario
from .design import ARCHS

_NUM = {"type": "number"}
_NONNEG = {"type": "number", "minimum": 0}
_PAIR = {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
         "minItems": 2, "maxItems": 2}

OPTIMIZER_KEYS = ("n_init", "patience", "penalty_risk", "ei_xi", "cg_restarts",
                  "cg_max_iter", "max_iterations", "max_levels", "estimator")

SCENARIO_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "p_pos": {"type": "number", "minimum": 0, "maximum": 1},
        "ood_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "n_samples": {"type": "integer", "minimum": 100},
        "period_ms": {"type": "number", "exclusiveMinimum": 0},
        "master_seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "severities": {
            "type": "object", "additionalProperties": False,
            "properties": {"e0": _NONNEG, "e1": _NONNEG},
        },
        "backend": {
            "type": "object", "additionalProperties": False,
            "properties": {f.name: _NONNEG for f in fields(BackendCoefficients)},
        },
        "space": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "ec_size": _PAIR,
                "ood_size": _PAIR,
                "archs": {"type": "array", "items": {"enum": list(ARCHS)},
                          "minItems": 1, "uniqueItems": True},
                "n_partitions": {"type": "integer", "minimum": 1},
            },
        },
        "optimizer": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "n_init": {"type": "integer", "minimum": 1},
                "patience": {"type": "integer", "minimum": 1},
                "penalty_risk": _NUM,
                "ei_xi": _NONNEG,
                "cg_restarts": {"type": "integer", "minimum": 1},
                "cg_max_iter": {"type": "integer", "minimum": 1},
                "max_iterations": {"type": "integer", "minimum": 1},
                "max_levels": {"type": "integer", "minimum": 2},
                "estimator": {"enum": ["direct", "closed_form"]},
            },
        },
    },
}


class ConfigError(ValueError):
    pass


def _path(err) -> str:
    return "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)


def validate_scenario_dict(data) -> None:
    """Raise :class:`ConfigError` naming the first offending location."""
    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        e = errors[0]
        raise ConfigError(f"{_path(e)}: {e.message}")


def scenario_from_dict(data) -> tuple[Scenario, dict]:
    """Validated ``(Scenario, optimizer overrides)``."""
    validate_scenario_dict(data)
    try:
        sc = Scenario.from_dict(data)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return sc, dict(data.get("optimizer", {}))


def load_scenario(path) -> tuple[Scenario, dict]:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: "
                          f"{exc.msg}") from exc
    try:
        return scenario_from_dict(data)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
