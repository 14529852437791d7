"""Run configuration: one JSON document, schema-validated, with resolved defaults."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from jsonschema import Draft202012Validator

from .exceptions import RBSDEError, InvalidSpecError
from .scenarios import SCENARIOS, ScenarioSpec

__all__ = ["ConfigParseError", "CONFIG_SCHEMA", "ACTIONS", "RunConfig", "load_config", "parse_config"]

ACTIONS = ("solve", "penalize-sweep", "compare", "probe-hypotheses", "divergence-probe", "norms")
METHODS = ("plain", "penalized", "reflected", "snell")

_SCENARIO = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": sorted(SCENARIOS)},
        "params": {"type": "object"},
        "description": {"type": "string"},
    },
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["action"],
    "properties": {
        "action": {"enum": list(ACTIONS)},
        "scenario": _SCENARIO,
        "method": {"enum": list(METHODS)},
        "penalty": {"type": "number", "minimum": 0},
        "schedule": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "order": {"type": "number", "exclusiveMinimum": 0},
        "compare_with": _SCENARIO,
        "probe": {
            "type": "object",
            "properties": {
                "samples": {"type": "integer", "minimum": 1},
                "box": {
                    "type": "object",
                    "additionalProperties": {
                        "type": "array", "items": {"type": "number"},
                        "minItems": 2, "maxItems": 2,
                    },
                },
                "hypotheses": {"type": "array", "items": {"enum": ["H2", "H3", "Z", "A"]}},
            },
            "additionalProperties": False,
        },
        "divergence": {
            "type": "object",
            "required": ["kind", "N_schedule"],
            "properties": {
                "kind": {"enum": ["counterexample5", "counterexample7"]},
                "N_schedule": {"type": "array", "items": {"type": "integer", "minimum": 1},
                               "minItems": 1},
                "horizon": {"type": "number", "exclusiveMinimum": 0},
                "enumeration_cap": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "numerics": {
            "type": "object",
            "properties": {
                "root_tol": {"type": "number", "exclusiveMinimum": 0},
                "probe_tol": {"type": "number", "exclusiveMinimum": 0},
                "compare_tol": {"type": "number", "minimum": 0},
                "enumeration_cap": {"type": "integer", "minimum": 1},
                "n_paths": {"type": "integer", "minimum": 2},
                "seed": {"type": "integer", "minimum": 0},
                "workers": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "output": {
            "type": "object",
            "properties": {
                "dir": {"type": "string"},
                "formats": {"type": "array", "items": {"enum": ["csv", "json"]}, "minItems": 1},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

NUMERIC_DEFAULTS = {
    "root_tol": 1e-12,
    "probe_tol": 1e-9,
    "compare_tol": 1e-9,
    "enumeration_cap": 20,
    "n_paths": 4096,
    "seed": None,
    "workers": None,
}


class ConfigParseError(RBSDEError, ValueError):
    """The run configuration is malformed or incomplete (CLI exit status 2)."""


@dataclass(frozen=True)
class RunConfig:
    action: str
    scenario: Optional[ScenarioSpec]
    method: Optional[str] = None
    penalty: Optional[float] = None
    schedule: Optional[tuple] = None
    order: float = 2.0
    compare_with: Optional[ScenarioSpec] = None
    probe: dict = field(default_factory=dict)
    divergence: Optional[dict] = None
    numerics: dict = field(default_factory=dict)
    output_dir: str = "rbsde-out"
    formats: tuple = ("csv", "json")

    @property
    def workers(self):
        return self.numerics["workers"] or os.cpu_count() or 1

    def to_dict(self):
        """Resolved configuration as embedded in reports (output directory omitted)."""

        def scen(s):
            return None if s is None else {"kind": s.kind, "params": s.resolved}

        return {
            "action": self.action,
            "scenario": scen(self.scenario),
            "method": self.method,
            "penalty": self.penalty,
            "schedule": None if self.schedule is None else list(self.schedule),
            "order": self.order,
            "compare_with": scen(self.compare_with),
            "probe": self.probe,
            "divergence": self.divergence,
            "numerics": {k: v for k, v in self.numerics.items() if k != "workers"},
            "formats": list(self.formats),
        }


def _require(doc, key, action):
    if doc.get(key) is None:
        raise ConfigParseError(f"action {action!r} requires field {key!r}")
    return doc[key]


def _scenario(doc, key):
    try:
        return ScenarioSpec(doc[key]["kind"], dict(doc[key].get("params", {})),
                            doc[key].get("description", ""))
    except InvalidSpecError as exc:
        raise ConfigParseError(f"{key}: {exc}") from None


def parse_config(doc):
    """Validate a decoded JSON document and return a RunConfig."""
    if not isinstance(doc, dict):
        raise ConfigParseError("configuration must be a JSON object")
    if "action" not in doc:
        raise ConfigParseError("missing required field 'action'")
    errors = sorted(Draft202012Validator(CONFIG_SCHEMA).iter_errors(doc), key=lambda e: e.path)
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.path) or "<root>"
        raise ConfigParseError(f"invalid configuration at {where}: {e.message}")

    action = doc["action"]
    numerics = {**NUMERIC_DEFAULTS, **doc.get("numerics", {})}
    scenario = None
    if action != "divergence-probe":
        _require(doc, "scenario", action)
        scenario = _scenario(doc, "scenario")
    method = doc.get("method")
    if action in ("solve", "compare", "norms"):
        method = _require(doc, "method", action)
        if method == "penalized":
            _require(doc, "penalty", action)
    schedule = None
    if action == "penalize-sweep":
        schedule = tuple(_require(doc, "schedule", action))
    compare_with = None
    if action == "compare":
        _require(doc, "compare_with", action)
        compare_with = _scenario(doc, "compare_with")
    divergence = None
    if action == "divergence-probe":
        divergence = {"horizon": 1.0, "enumeration_cap": 24, **_require(doc, "divergence", action)}

    # sampling happens whenever path functionals exceed the enumeration cap
    if numerics["seed"] is None:
        if action in ("penalize-sweep", "norms"):
            n = scenario.resolved["N"]
            if n > numerics["enumeration_cap"]:
                raise ConfigParseError(
                    f"N={n} exceeds enumeration_cap={numerics['enumeration_cap']}: "
                    "path sampling is used, so numerics.seed is required"
                )
        if action == "divergence-probe" and (
            max(divergence["N_schedule"]) > divergence["enumeration_cap"]
            and (divergence["kind"] == "counterexample7" or doc.get("order", 1.0) != 1.0)
        ):
            raise ConfigParseError("divergence probe samples paths, so numerics.seed is required")

    output = doc.get("output", {})
    return RunConfig(
        action=action,
        scenario=scenario,
        method=method,
        penalty=doc.get("penalty"),
        schedule=schedule,
        order=float(doc.get("order", 1.0 if action == "divergence-probe" else 2.0)),
        compare_with=compare_with,
        probe={"samples": 10_000, "box": {}, **doc.get("probe", {})},
        divergence=divergence,
        numerics=numerics,
        output_dir=output.get("dir", "rbsde-out"),
        formats=tuple(output.get("formats", ("csv", "json"))),
    )


def load_config(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigParseError(f"cannot read configuration {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"configuration is not valid JSON: {exc}") from None
    return parse_config(doc)
