"""JSON structure files, the ``catalog:`` URI scheme and report serialisation."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .abundant import AbundantStructure
from .catalog import CatalogEntry, get_entry
from .errors import ExprSyntaxError, SchemaError
from .exprfield import ScalarFieldExpr, parse
from .fields import GradientField
from .product import ProductStructure, format_key, normalize_components

_KEY = r"^([1-9]{3}|[1-9][0-9]*,[1-9][0-9]*,[1-9][0-9]*)$"
_COMPONENTS = {"type": "object", "propertyNames": {"pattern": _KEY},
               "additionalProperties": {"type": ["string", "number"]}}
_DOMAIN = {"type": "array", "items": {"type": "array", "items": {"type": "number"},
                                       "minItems": 2, "maxItems": 2}}
_SAMPLED_T = {
    "type": "object",
    "required": ["gradient", "basepoint"],
    "properties": {
        "gradient": {"type": "array", "items": {"type": "string"}},
        "basepoint": {"type": "array", "items": {"type": "number"}},
        "sampled": {"type": "object", "properties": {
            "points": {"type": "array"}, "values": {"type": "array"}}},
    },
}

SCHEMA = {
    "oneOf": [
        {"type": "object", "required": ["kind", "dim", "domain", "components"],
         "properties": {"kind": {"const": "product"}, "dim": {"type": "integer", "minimum": 3},
                        "domain": _DOMAIN, "components": _COMPONENTS, "name": {"type": "string"}},
         "additionalProperties": False},
        {"type": "object", "required": ["kind", "dim", "domain", "S", "t"],
         "properties": {"kind": {"const": "abundant"}, "dim": {"type": "integer", "minimum": 3},
                        "domain": _DOMAIN, "S": _COMPONENTS,
                        "t": {"oneOf": [{"type": ["string", "number"]}, _SAMPLED_T]},
                        "name": {"type": "string"}},
         "additionalProperties": False},
    ]
}


@dataclass
class Resolved:
    """What a CLI argument points at: a structure, plus its catalog entry if built in."""

    structure: object
    entry: CatalogEntry | None = None
    source: str = ""


def _components_to_json(components, dim):
    return {format_key(idx, dim): str(f) for idx, f in components.items()}


def structure_to_dict(obj, sample_points=None):
    if isinstance(obj, ProductStructure):
        return {"kind": "product", "name": obj.name, "dim": obj.dim,
                "domain": obj.domain.tolist(),
                "components": _components_to_json(obj.components, obj.dim)}
    if isinstance(obj, AbundantStructure):
        if isinstance(obj.t, ScalarFieldExpr):
            t = str(obj.t)
        else:
            t = {"gradient": [str(g) for g in obj.t.gradient],
                 "basepoint": obj.t.basepoint.tolist()}
            if sample_points is not None:
                X = np.atleast_2d(sample_points)
                t["sampled"] = {"points": X.tolist(), "values": obj.t.values(X).tolist()}
        return {"kind": "abundant", "name": obj.name, "dim": obj.dim,
                "domain": obj.domain.tolist(),
                "S": _components_to_json(obj.S_components, obj.dim), "t": t}
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def structure_from_dict(data):
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        raise SchemaError(f"structure file does not match the schema: {exc.message}") from None
    n = data["dim"]
    if len(data["domain"]) != n:
        raise SchemaError(f"domain lists {len(data['domain'])} intervals for dim {n}")
    try:
        if data["kind"] == "product":
            comps = normalize_components(data["components"], n, require_sorted=True)
            return ProductStructure(n, comps, data["domain"], name=data.get("name", ""))
        comps = normalize_components(data["S"], n, require_sorted=True)
        t = data["t"]
        if isinstance(t, dict):
            t = GradientField([parse(g, n) for g in t["gradient"]], t["basepoint"],
                              data["domain"])
        else:
            t = parse(str(t), n)
        return AbundantStructure(n, comps, t, data["domain"], name=data.get("name", ""))
    except ExprSyntaxError as exc:
        raise SchemaError(f"bad expression: {exc}") from None
    except ValueError as exc:
        raise SchemaError(str(exc)) from None


def resolve(source, which=None):
    """Load ``catalog:<name>`` or a JSON file.

    For catalog entries ``which`` picks "product" (default) or "abundant".
    """
    if source.startswith("catalog:"):
        entry = get_entry(source[len("catalog:"):])
        if which == "abundant":
            if entry.abundant is None:
                raise SchemaError(f"catalog entry {entry.name} has no abundant structure")
            return Resolved(entry.abundant, entry, source)
        return Resolved(entry.product, entry, source)
    try:
        data = json.loads(Path(source).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{source}: not valid JSON ({exc.msg})") from None
    return Resolved(structure_from_dict(data), None, source)


def dumps(obj):
    """Deterministic JSON text (sorted keys, fixed indentation, trailing newline)."""
    return json.dumps(_plain(obj), indent=2, sort_keys=True, allow_nan=True) + "\n"


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return _plain(v.tolist())
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    return v
