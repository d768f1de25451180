"""JSON experiment configuration: schema, parsing and object construction."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from typing import Any

import jsonschema

from .environments import EnvironmentSpec, RenewalLaw
from .graphs import SinrParams
from .pathloss import PathLoss
from .percolation import MODELS, ModelConfig
from .point_processes import MarkDistribution

_MARKS = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["constant", "uniform", "pareto", "two_point", "discrete", "geometric"]},
        "c": {"type": "number", "exclusiveMinimum": 0},
        "a": {"type": "number", "minimum": 0},
        "b": {"type": "number", "exclusiveMinimum": 0},
        "alpha": {"type": "number", "exclusiveMinimum": 0},
        "scale": {"type": "number", "exclusiveMinimum": 0},
        "values": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "probs": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "p": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
    },
    "additionalProperties": False,
}

_PATHLOSS = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["one_plus", "min_power", "compact", "table"]},
        "p": {"type": "number", "exclusiveMinimum": 0},
        "base": {"$ref": "#/$defs/pathloss"},
        "r_max": {"type": "number", "exclusiveMinimum": 0},
        "knots": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 2},
        "values": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}, "minItems": 2},
    },
    "additionalProperties": False,
}

_RENEWAL = {
    "type": "object",
    "required": ["kind", "a"],
    "properties": {
        "kind": {"enum": ["deterministic", "exponential", "uniform"]},
        "a": {"type": "number", "exclusiveMinimum": 0},
        "b": {"type": "number", "exclusiveMinimum": 0},
    },
    "additionalProperties": False,
}

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$defs": {"marks": _MARKS, "pathloss": _PATHLOSS, "renewal": _RENEWAL},
    "type": "object",
    "required": ["model", "seed"],
    "properties": {
        "model": {"enum": list(MODELS)},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "reps": {"type": "integer", "minimum": 1},
        "window": {
            "type": "object",
            "properties": {
                "d": {"type": "integer", "minimum": 2},
                "L": {"type": "number", "exclusiveMinimum": 0},
                "padding": {"type": ["number", "null"], "minimum": 0},
            },
            "additionalProperties": False,
        },
        "params": {
            "type": "object",
            "properties": {
                "lam": {"type": "number", "minimum": 0},
                "r": {"type": "number", "exclusiveMinimum": 0},
                "p": {"type": "number", "minimum": 0, "maximum": 1},
                "n": {"type": "integer", "minimum": 2},
                "s": {"type": "number", "exclusiveMinimum": 0},
                "margin": {"type": ["number", "null"], "minimum": 0},
                "axis": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "marks": {"$ref": "#/$defs/marks"},
        "pathloss": {"$ref": "#/$defs/pathloss"},
        "sinr": {
            "type": "object",
            "required": ["N0", "tau"],
            "properties": {
                "N0": {"type": "number", "exclusiveMinimum": 0},
                "gamma": {"type": "number", "minimum": 0},
                "tau": {"type": "number", "exclusiveMinimum": 0},
                "power": {"oneOf": [{"type": "number", "exclusiveMinimum": 0}, {"$ref": "#/$defs/marks"}]},
            },
            "additionalProperties": False,
        },
        "env": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["pvt", "pdt", "manhattan", "nested_manhattan"]},
                "lambda_s": {"type": "number", "exclusiveMinimum": 0},
                "law": {"$ref": "#/$defs/renewal"},
                "inner_law": {"$ref": "#/$defs/renewal"},
                "c_norm": {"type": "number", "exclusiveMinimum": 0},
                "normalize": {"type": "boolean"},
                "norm_reps": {"type": "integer", "minimum": 100},
                "norm_L": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "sweep": {
            "type": "object",
            "required": ["axis", "grid"],
            "properties": {
                "axis": {"enum": ["lam", "gamma", "p", "r"]},
                "grid": {"type": "array", "items": {"type": "number"}, "minItems": 1},
            },
            "additionalProperties": False,
        },
        "critical": {
            "type": "object",
            "required": ["axis", "bracket"],
            "properties": {
                "axis": {"enum": ["lam", "gamma", "p", "r"]},
                "bracket": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                "target": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "tol": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "bounds": {
            "type": "object",
            "properties": {
                "M": {"type": "number", "exclusiveMinimum": 0},
                "r": {"type": "number", "exclusiveMinimum": 0},
                "power_level": {"type": "number", "exclusiveMinimum": 0},
                "n": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


class ConfigError(ValueError):
    """Configuration could not be parsed, validated or built."""


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse and schema-validate a JSON document.

    Raises
    ------
    ConfigError
        With line and column context for syntax errors and the offending
        field path for validation errors.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        lines = text.splitlines()
        line = lines[exc.lineno - 1] if 0 < exc.lineno <= len(lines) else ""
        caret = " " * max(exc.colno - 1, 0) + "^"
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}\n    {line}\n    {caret}") from None
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        msgs = []
        for err in errors:
            path = ".".join(str(p) for p in err.absolute_path) or "<root>"
            msgs.append(f"field '{path}': {err.message}")
        raise ConfigError(f"{source}: invalid configuration\n  " + "\n  ".join(msgs))
    return doc


def load_config(path) -> dict:
    with open(path) as fh:
        return parse_config_text(fh.read(), str(path))


def config_hash(doc: dict) -> str:
    """First 16 hex digits of the SHA-256 of the canonical JSON encoding."""
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def build_marks(spec: dict) -> MarkDistribution:
    k = spec["kind"]
    try:
        if k == "constant":
            return MarkDistribution.constant(spec["c"])
        if k == "uniform":
            return MarkDistribution.uniform(spec["a"], spec["b"])
        if k == "pareto":
            return MarkDistribution.pareto_tail(spec["alpha"], spec.get("scale", 1.0))
        if k in ("two_point", "discrete"):
            return MarkDistribution.discrete(spec["values"], spec["probs"])
        return MarkDistribution.geometric(spec["p"])
    except KeyError as exc:
        raise ConfigError(f"mark law {k!r} needs field {exc.args[0]!r}") from None


def build_pathloss(spec: dict, d: int = 2) -> PathLoss:
    k = spec["kind"]
    try:
        if k == "one_plus":
            return PathLoss.power_law_one_plus(spec["p"], d)
        if k == "min_power":
            return PathLoss.min_power_law(spec["p"], d)
        if k == "compact":
            return PathLoss.compact_support(build_pathloss(spec["base"], d), spec["r_max"])
        return PathLoss.table(spec["knots"], spec["values"], d)
    except KeyError as exc:
        raise ConfigError(f"path loss {k!r} needs field {exc.args[0]!r}") from None


def build_env(spec: dict) -> EnvironmentSpec:
    law = RenewalLaw(**spec["law"]) if "law" in spec else None
    inner = RenewalLaw(**spec["inner_law"]) if "inner_law" in spec else None
    return EnvironmentSpec(spec["kind"], spec.get("lambda_s", 1.0), law, inner, spec.get("c_norm", 1.0))


def build_model_config(doc: dict) -> ModelConfig:
    """Turn a validated document into a :class:`ModelConfig`."""
    win = doc.get("window", {})
    par = doc.get("params", {})
    d = win.get("d", 2)
    kw: dict[str, Any] = dict(model=doc["model"], d=d, L=float(win.get("L", 20.0)), padding=win.get("padding"))
    for key in ("lam", "r", "p", "n", "s", "margin", "axis"):
        if key in par:
            kw[key] = par[key]
    try:
        if "marks" in doc:
            kw["marks"] = build_marks(doc["marks"])
        if "pathloss" in doc:
            kw["pathloss"] = build_pathloss(doc["pathloss"], d)
        if "sinr" in doc:
            s = doc["sinr"]
            power = s.get("power", 1.0)
            power = build_marks(power) if isinstance(power, dict) else float(power)
            kw["sinr"] = SinrParams(s["N0"], s.get("gamma", 0.0), s["tau"], power)
        if "env" in doc:
            kw["env"] = build_env(doc["env"])
        return ModelConfig(**kw)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"inconsistent parameters for model {doc['model']!r}: {exc}") from None


def _marks_to_dict(m: MarkDistribution) -> dict:
    k, p = m.kind, m.params
    if k == "constant":
        return {"kind": k, "c": p[0]}
    if k == "uniform":
        return {"kind": k, "a": p[0], "b": p[1]}
    if k == "pareto":
        return {"kind": k, "alpha": p[0], "scale": p[1]}
    if k == "discrete":
        return {"kind": k, "values": list(p[0]), "probs": list(p[1])}
    return {"kind": k, "p": p[0]}


def _pathloss_to_dict(ell: PathLoss) -> dict:
    if ell.kind == "compact":
        return {"kind": "compact", "base": _pathloss_to_dict(ell.params[0]), "r_max": ell.params[1]}
    if ell.kind == "table":
        return {"kind": "table", "knots": list(ell.params[0]), "values": list(ell.params[1])}
    return {"kind": ell.kind, "p": ell.params[0]}


def model_config_to_dict(cfg: ModelConfig) -> dict:
    """Plain-JSON echo of a model configuration."""
    out: dict[str, Any] = {
        "model": cfg.model,
        "window": {"d": cfg.d, "L": cfg.L, "padding": cfg.window.padding},
        "params": {"lam": cfg.lam, "r": cfg.r, "p": cfg.p, "n": cfg.n, "s": cfg.s,
                   "margin": cfg.rule().margin, "axis": cfg.axis},
    }
    if cfg.marks is not None:
        out["marks"] = _marks_to_dict(cfg.marks)
    if cfg.pathloss is not None:
        out["pathloss"] = _pathloss_to_dict(cfg.pathloss)
    if cfg.sinr is not None:
        s = cfg.sinr
        out["sinr"] = {"N0": s.N0, "gamma": s.gamma, "tau": s.tau,
                       "power": _marks_to_dict(s.power) if s.random_power else s.power}
    if cfg.env is not None:
        e = cfg.env
        env: dict[str, Any] = {"kind": e.kind, "lambda_s": e.lambda_s, "c_norm": e.c_norm}
        for name in ("law", "inner_law"):
            law = getattr(e, name)
            if law is not None:
                env[name] = {"kind": law.kind, "a": law.a, "b": law.b}
        out["env"] = env
    return out


@dataclass
class Experiment:
    """Validated document plus the objects built from it."""

    doc: dict
    model: ModelConfig

    @property
    def hash(self) -> str:
        return config_hash(self.doc)


def experiment_from_doc(doc: dict, seed: int | None = None, reps: int | None = None) -> Experiment:
    doc = copy.deepcopy(doc)
    if seed is not None:
        doc["seed"] = int(seed)
    if reps is not None:
        doc["reps"] = int(reps)
    return Experiment(doc, build_model_config(doc))
