"""Run configuration: a JSON document validated against a strict schema.

Unknown keys anywhere are rejected, so a misspelt option fails loudly
instead of silently running the default experiment.
"""

from __future__ import annotations

import inspect
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .measure import LifespanMeasure, MeasureError, measure_from_dict


class ConfigError(ValueError):
    """The configuration cannot be used; the CLI maps this to exit code 3."""


_POS = {"type": "number", "exclusiveMinimum": 0}
_COUNT = {"type": "integer", "minimum": 1}

MEASURE_SCHEMA = {
    "oneOf": [
        {
            "type": "object",
            "properties": {"kind": {"const": "exponential"}, "b": _POS, "d": _POS},
            "required": ["kind", "b", "d"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "kind": {"const": "atoms"},
                "points": {
                    "type": "array",
                    "minItems": 1,
                    "items": {"type": "array", "items": _POS, "minItems": 2, "maxItems": 2},
                },
            },
            "required": ["kind", "points"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "kind": {"const": "table"},
                "grid": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 2},
                "density": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 2},
                "tilt": {"type": "number", "minimum": 0},
            },
            "required": ["kind", "grid", "density"],
            "additionalProperties": False,
        },
    ]
}

CHECK_OPTIONS = {
    "type": "object",
    "properties": {
        "n": _COUNT,
        "m": _COUNT,
        "T": _POS,
        "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "x": _POS,
        "a": _POS,
        "sigma": _POS,
        "delta": _POS,
        "seeds": _COUNT,
        "bins": {"type": "integer", "minimum": 2},
    },
    "additionalProperties": False,
}

CHECK_IDS = (
    "scale",
    "identities",
    "survival-lemma",
    "width-reversal",
    "geometric-equivalence",
    "contour-transform",
    "contour-law",
    "over-undershoot",
    "reversal-invariance",
    "measure-change",
    "conditional-decomposition",
    "calibration",
)

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "measure": MEASURE_SCHEMA,
        "T": _POS,
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "threads": _COUNT,
        "simulate": {
            "type": "object",
            "properties": {
                "n": _COUNT,
                "ancestor": {"oneOf": [{"enum": ["standard", "top", "bottom"]}, _POS]},
                "stopping": {"oneOf": [{"const": "first-survivor"}, {"type": "number", "exclusiveMinimum": 0, "maximum": 1}]},
                "tilted": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "scale": {
            "type": "object",
            "properties": {"x_max": _POS, "h": _POS},
            "additionalProperties": False,
        },
        "verify": {
            "type": "object",
            "properties": {
                "checks": {"type": "array", "items": {"enum": list(CHECK_IDS)}, "uniqueItems": True},
                "options": {
                    "type": "object",
                    "propertyNames": {"enum": list(CHECK_IDS)},
                    "additionalProperties": CHECK_OPTIONS,
                },
            },
            "additionalProperties": False,
        },
        "epi": {
            "type": "object",
            "properties": {"n": _COUNT, "bin": _POS},
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


@dataclass
class RunConfig:
    measure: LifespanMeasure | None = None
    T: float = 1.0
    seed: int = 0
    threads: int | None = None
    simulate: dict = field(default_factory=dict)
    scale: dict = field(default_factory=dict)
    verify: dict = field(default_factory=dict)
    epi: dict = field(default_factory=dict)

    def require_measure(self) -> LifespanMeasure:
        if self.measure is None:
            raise ConfigError("the configuration has no 'measure'")
        return self.measure

    def check_options(self, check_id: str, fn) -> dict:
        """Per-check overrides, restricted to the arguments ``fn`` accepts."""
        opts = dict(self.verify.get("options", {}).get(check_id, {}))
        accepted = inspect.signature(fn).parameters
        bad = sorted(k for k in opts if k not in accepted)
        if bad:
            raise ConfigError(f"check {check_id!r} does not take option(s) {', '.join(bad)}")
        return opts


def validate(doc) -> None:
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from exc


def parse_config(doc: dict) -> RunConfig:
    validate(doc)
    try:
        mu = measure_from_dict(doc["measure"]) if "measure" in doc else None
    except (MeasureError, ValueError) as exc:
        raise ConfigError(f"config error at measure: {exc}") from exc
    T = float(doc.get("T", 1.0))
    if not math.isfinite(T):
        raise ConfigError("T must be finite")
    return RunConfig(
        measure=mu,
        T=T,
        seed=int(doc.get("seed", 0)),
        threads=doc.get("threads"),
        simulate=dict(doc.get("simulate", {})),
        scale=dict(doc.get("scale", {})),
        verify=dict(doc.get("verify", {})),
        epi=dict(doc.get("epi", {})),
    )


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(doc)
