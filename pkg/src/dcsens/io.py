"""Reading and writing the influence-diagram file format (YAML, ``format: 1``)."""
from __future__ import annotations

from pathlib import Path
from typing import Any

import yaml

from .model import (
    UTILITY, ChanceSpec, DecisionSpec, DiagramError, Evidence, InfluenceDiagram,
    MetaParameter, UtilityFunction, UtilitySpec, Variable,
)

FORMAT_VERSION = 1


class ParseError(DiagramError):
    """The document is not well-formed; the message carries the location."""


def _require(mapping: Any, key: str, where: str):
    if not isinstance(mapping, dict):
        raise ParseError(f"{where}: expected a mapping")
    if key not in mapping:
        raise ParseError(f"{where}: missing field {key!r}")
    return mapping[key]


def _floats(seq: Any, where: str) -> tuple[float, ...]:
    if not isinstance(seq, list):
        raise ParseError(f"{where}: expected a flat list of numbers")
    try:
        return tuple(float(x) for x in seq)
    except (TypeError, ValueError):
        raise ParseError(f"{where}: non-numeric entry") from None


def _strs(seq: Any, where: str) -> tuple[str, ...]:
    if seq is None:
        return ()
    if not isinstance(seq, list):
        raise ParseError(f"{where}: expected a list")
    return tuple(str(x) for x in seq)


def parse_diagram(doc: dict) -> InfluenceDiagram:
    """Build and validate a diagram from an already-decoded document."""
    if not isinstance(doc, dict):
        raise ParseError("document root must be a mapping")
    if doc.get("format") != FORMAT_VERSION:
        raise ParseError(f"unsupported or missing format field (expected format: {FORMAT_VERSION})")

    variables: dict[str, Variable] = {}
    for i, entry in enumerate(_require(doc, "variables", "document") or []):
        where = f"variables[{i}]"
        vid = str(_require(entry, "id", where))
        if vid in variables:
            raise ParseError(f"{where}: duplicate variable id {vid}")
        kind = str(_require(entry, "kind", where))
        outcomes = entry.get("outcomes")
        if kind == UTILITY and outcomes is None:
            outcomes = ["u", "not_u"]
        variables[vid] = Variable(vid, kind, _strs(outcomes, f"{where}.outcomes"), str(entry.get("name", "")))

    chance: dict[str, ChanceSpec] = {}
    for i, entry in enumerate(doc.get("chance") or []):
        where = f"chance[{i}]"
        vid = str(_require(entry, "variable", where))
        if vid in chance:
            raise ParseError(f"{where}: second CPT for {vid}")
        chance[vid] = ChanceSpec(vid, _strs(entry.get("parents"), f"{where}.parents"),
                                 _floats(_require(entry, "cpt", where), f"{where}.cpt"))

    decisions: dict[str, DecisionSpec] = {}
    for i, entry in enumerate(doc.get("decisions") or []):
        where = f"decisions[{i}]"
        vid = str(_require(entry, "variable", where))
        if vid not in variables:
            raise DiagramError(f"{where}: unknown decision variable {vid}")
        parents = _strs(entry.get("parents"), f"{where}.parents")
        avail = entry.get("availability")
        if avail is None:
            n = variables[vid].card
            for p in parents:
                if p not in variables:
                    raise DiagramError(f"{where}: unknown parent {p}")
                n *= variables[p].card
            availability = (1,) * n
        else:
            availability = tuple(int(round(a)) for a in _floats(avail, f"{where}.availability"))
        decisions[vid] = DecisionSpec(vid, parents, availability)

    utility = None
    if doc.get("utility") is not None:
        entry = doc["utility"]
        uvars = [v.id for v in variables.values() if v.kind == UTILITY]
        if len(uvars) != 1:
            raise DiagramError("utility section needs exactly one variable of kind utility")
        fn = _require(entry, "utility", "utility")
        try:
            function = UtilityFunction(str(_require(fn, "kind", "utility.utility")), float(_require(fn, "a", "utility.utility")),
                                       float(fn.get("b", 0.0)), None if fn.get("rho") is None else float(fn["rho"]))
        except (TypeError, ValueError) as exc:
            raise ParseError(f"utility.utility: {exc}") from None
        utility = UtilitySpec(uvars[0], _strs(entry.get("attributes"), "utility.attributes"),
                              _floats(_require(entry, "values", "utility"), "utility.values"), function)

    metas: dict[str, MetaParameter] = {}
    for i, entry in enumerate(doc.get("meta_parameters") or []):
        where = f"meta_parameters[{i}]"
        k = str(_require(entry, "id", where))
        if k in metas:
            raise ParseError(f"{where}: duplicate meta-parameter id {k}")
        metas[k] = MetaParameter(k, str(_require(entry, "variable", where)),
                                 _floats(_require(entry, "c0", where), f"{where}.c0"),
                                 _floats(_require(entry, "c1", where), f"{where}.c1"),
                                 float(_require(entry, "reference", where)))

    ev = doc.get("evidence") or {}
    if not isinstance(ev, dict):
        raise ParseError("evidence: expected a variable -> outcome mapping")
    evidence = Evidence({str(k): str(v) for k, v in ev.items()})
    return InfluenceDiagram(variables, chance, decisions, utility, metas, evidence)


def loads_diagram(text: str) -> InfluenceDiagram:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        loc = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ParseError(f"malformed document{loc}: {getattr(exc, 'problem', exc)}") from None
    return parse_diagram(doc)


def load_diagram(path: str | Path) -> InfluenceDiagram:
    return loads_diagram(Path(path).read_text(encoding="utf-8"))


def to_document(d: InfluenceDiagram) -> dict:
    doc: dict[str, Any] = {"format": FORMAT_VERSION, "variables": []}
    for v in d.variables.values():
        entry = {"id": v.id, "kind": v.kind, "outcomes": list(v.outcomes)}
        if v.name:
            entry["name"] = v.name
        doc["variables"].append(entry)
    doc["chance"] = [{"variable": s.variable, "parents": list(s.parents), "cpt": list(s.cpt)}
                     for s in d.chance.values()]
    doc["decisions"] = [{"variable": s.variable, "parents": list(s.parents), "availability": list(s.availability)}
                        for s in d.decisions.values()]
    if d.utility is not None:
        fn = d.utility.function
        ufn = {"kind": fn.kind, "a": fn.a, "b": fn.b}
        if fn.rho is not None:
            ufn["rho"] = fn.rho
        doc["utility"] = {"attributes": list(d.utility.attributes), "values": list(d.utility.values), "utility": ufn}
    doc["meta_parameters"] = [{"id": m.id, "variable": m.variable, "c0": list(m.c0), "c1": list(m.c1),
                               "reference": m.reference} for m in d.meta_parameters.values()]
    doc["evidence"] = dict(d.evidence.assignments)
    return doc


def dump_diagram(d: InfluenceDiagram) -> str:
    return yaml.safe_dump(to_document(d), sort_keys=False, default_flow_style=None)


def save_diagram(d: InfluenceDiagram, path: str | Path) -> None:
    Path(path).write_text(dump_diagram(d), encoding="utf-8")
