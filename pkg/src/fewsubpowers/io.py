"""JSON file formats for algebras, templates, instances and reports."""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema

from .algebra import FiniteAlgebra, Operation
from .csp import Constraint, CspInstance, Relation, RelationalTemplate
from .errors import PreconditionError

_OPERATION = {
    "type": "object",
    "required": ["name", "arity", "table"],
    "properties": {
        "name": {"type": "string"},
        "arity": {"type": "integer", "minimum": 1},
        "table": {"type": "array", "items": {"type": "integer", "minimum": 0}},
    },
}

ALGEBRA_SCHEMA = {
    "type": "object",
    "required": ["size", "operations"],
    "properties": {
        "name": {"type": "string"},
        "size": {"type": "integer", "minimum": 1},
        "operations": {"type": "array", "items": _OPERATION},
    },
}

TEMPLATE_SCHEMA = {
    "type": "object",
    "required": ["domain_size", "relations"],
    "properties": {
        "domain_size": {"type": "integer", "minimum": 1},
        "relations": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "arity", "tuples"],
                "properties": {
                    "name": {"type": "string"},
                    "arity": {"type": "integer", "minimum": 1},
                    "tuples": {"type": "array",
                               "items": {"type": "array", "items": {"type": "integer", "minimum": 0}}},
                },
            },
        },
        "polymorphisms": {"type": "array", "items": _OPERATION},
    },
}

INSTANCE_SCHEMA = {
    "type": "object",
    "required": ["variables", "constraints"],
    "properties": {
        "variables": {"type": "array", "items": {"type": "string"}},
        "constraints": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["relation", "scope"],
                "properties": {
                    "relation": {"type": "string"},
                    "scope": {"type": "array", "items": {"type": "string"}},
                },
            },
        },
    },
}

_STATUS = {"enum": ["SAT", "UNSAT", "CONSISTENT", "CONTRADICTION", "FOUND", "NOT_FOUND", "MATCH", "MISMATCH",
                    "GENERATED"]}
_DOMAINS = {"type": ["object", "null"], "additionalProperties": {"type": "array", "items": {"type": "integer"}}}
_ASSIGNMENT = {"type": ["object", "null"], "additionalProperties": {"type": "integer"}}

REPORT_SCHEMA = {
    "type": "object",
    "required": ["command", "status"],
    "properties": {
        "command": {"enum": ["solve", "oracle", "lac", "slac", "pc23", "affine", "absorb", "polysearch", "gen",
                             "verify"]},
        "status": _STATUS,
        "decision": {"enum": ["SAT", "UNSAT"]},
        "witness": _ASSIGNMENT,
        "assignment": _ASSIGNMENT,
        "trace": {"type": "array", "items": {"type": "string"}},
        "stats": {"type": "object"},
        "domains": _DOMAINS,
        "tests": {"type": "array", "items": {"type": "object"}},
        "absorbers": {"type": "array", "items": {"type": "object"}},
        "operation": {"type": ["object", "null"]},
        "complete": {"type": "boolean"},
        "template": TEMPLATE_SCHEMA,
        "instance": INSTANCE_SCHEMA,
        "label": {"type": ["string", "null"]},
        "differences": {"type": "array", "items": {"type": "string"}},
    },
    "allOf": [
        {"if": {"properties": {"command": {"const": "solve"}}},
         "then": {"required": ["decision", "witness", "trace", "stats"]}},
    ],
}

SCHEMAS = {"algebra": ALGEBRA_SCHEMA, "template": TEMPLATE_SCHEMA, "instance": INSTANCE_SCHEMA,
           "report": REPORT_SCHEMA}


def validate(doc, kind: str) -> None:
    if kind not in SCHEMAS:
        raise PreconditionError(f"unknown document kind {kind!r}")
    try:
        jsonschema.validate(doc, SCHEMAS[kind])
    except jsonschema.ValidationError as e:
        raise PreconditionError(f"invalid {kind} document: {e.message}") from None


def dumps(doc) -> str:
    """Canonical text: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def read_json(path) -> object:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise PreconditionError(f"no such file: {path}") from None
    except json.JSONDecodeError as e:
        raise PreconditionError(f"{path}: not JSON ({e})") from None


def _operation(doc: dict, size: int) -> Operation:
    if len(doc["table"]) != size ** doc["arity"]:
        raise PreconditionError(f"operation {doc['name']!r} needs {size ** doc['arity']} table entries")
    return Operation(doc["name"], doc["arity"], size, tuple(doc["table"]))


def algebra_from_json(doc: dict) -> FiniteAlgebra:
    validate(doc, "algebra")
    size = doc["size"]
    return FiniteAlgebra(size, tuple(_operation(o, size) for o in doc["operations"]), doc.get("name", ""))


def template_from_json(doc: dict) -> RelationalTemplate:
    validate(doc, "template")
    size = doc["domain_size"]
    rels = [Relation(r["name"], r["arity"], {tuple(t) for t in r["tuples"]}) for r in doc["relations"]]
    polys = [_operation(o, size) for o in doc.get("polymorphisms", [])]
    return RelationalTemplate(size, tuple(rels), tuple(polys))


def instance_from_json(doc: dict, template: RelationalTemplate) -> CspInstance:
    validate(doc, "instance")
    cons = [Constraint(c["relation"], tuple(c["scope"])) for c in doc["constraints"]]
    return CspInstance(tuple(doc["variables"]), tuple(cons), template)


def load_algebra(path) -> FiniteAlgebra:
    return algebra_from_json(read_json(path))


def load_template(path) -> RelationalTemplate:
    return template_from_json(read_json(path))


def load_instance(path, template: RelationalTemplate) -> CspInstance:
    return instance_from_json(read_json(path), template)
