"""Constraint-graph blueprints: parsing, validation, scoring, linearization.

The graph is the value every other stage exchanges: concept nodes, typed
relation edges, a free-text mutation log. Everything here is an immutable
value and a pure function, so graphs can be shared across concurrent episodes
without synchronization.

Construction is deliberately permissive: agents propose broken graphs all the
time and the critique stage needs to see them, so structural rules live in
:func:`validate`, not in the constructors. Constructors only pin the *shape*
(strings are strings, lists are lists).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import networkx as nx

from graphforge.errors import DecodeError, InvalidGraph, NoJsonFound, SchemaError

GRAPH_KEYS = ("graph_id", "nodes", "edges", "mutation_log")


@dataclass(frozen=True)
class Node:
    id: str
    concept: str
    description: str


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    relation: str


@dataclass(frozen=True)
class StyleTokens:
    """Global generation attributes, e.g. difficulty or question type.

    ``dimensions`` is an ordered name -> value mapping; order is part of the
    value and is preserved through prompts and persistence.
    """

    dimensions: dict[str, str]

    def __post_init__(self):
        if not self.dimensions:
            raise ValueError("StyleTokens needs at least one dimension")

    def as_lines(self) -> str:
        return "\n".join(f"{name}: {value}" for name, value in self.dimensions.items())


@dataclass(frozen=True)
class ConstraintGraph:
    graph_id: str
    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    mutation_log: str = ""


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[tuple[str, str], ...] = field(default_factory=tuple)

    @property
    def valid(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return {"valid": self.valid, "violations": [list(v) for v in self.violations]}


# --- JSON extraction ---------------------------------------------------------

def iter_json_candidates(text: str):
    """Yield (decoded, raw) for each balanced top-level ``{...}`` in ``text``.

    Brace balancing is string-aware so braces inside JSON strings do not end a
    candidate early. Candidates that fail to decode are yielded as
    ``(None, raw)`` so callers can distinguish "malformed" from "absent".
    """
    i, n = 0, len(text)
    while i < n:
        if text[i] != "{":
            i += 1
            continue
        depth, j, in_string, escaped = 0, i, False, False
        end = None
        while j < n:
            ch = text[j]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
            elif ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    end = j
                    break
            j += 1
        if end is None:
            # Unbalanced tail; nothing further can close.
            return
        raw = text[i : end + 1]
        try:
            yield json.loads(raw), raw
        except json.JSONDecodeError:
            yield None, raw
        i = end + 1


def _require_str(value, label: str) -> str:
    if not isinstance(value, str):
        raise SchemaError(f"{label} must be a string, got {type(value).__name__}")
    return value


def graph_from_dict(doc: dict) -> ConstraintGraph:
    """Decode the canonical graph document. Shape checks only, no validation."""
    missing = [k for k in GRAPH_KEYS if k not in doc]
    if missing:
        raise SchemaError(f"graph document missing keys: {', '.join(missing)}")
    if not isinstance(doc["nodes"], list) or not isinstance(doc["edges"], list):
        raise SchemaError("'nodes' and 'edges' must be arrays")
    nodes = []
    for entry in doc["nodes"]:
        if not isinstance(entry, dict):
            raise SchemaError("node entries must be objects")
        try:
            nodes.append(
                Node(
                    id=_require_str(entry["id"], "node.id"),
                    concept=_require_str(entry["concept"], "node.concept"),
                    description=_require_str(entry["description"], "node.description"),
                )
            )
        except KeyError as exc:
            raise SchemaError(f"node entry missing key {exc}") from exc
    edges = []
    for entry in doc["edges"]:
        if not isinstance(entry, dict):
            raise SchemaError("edge entries must be objects")
        try:
            edges.append(
                Edge(
                    source=_require_str(entry["source"], "edge.source"),
                    target=_require_str(entry["target"], "edge.target"),
                    relation=_require_str(entry["relation"], "edge.relation"),
                )
            )
        except KeyError as exc:
            raise SchemaError(f"edge entry missing key {exc}") from exc
    return ConstraintGraph(
        graph_id=_require_str(doc["graph_id"], "graph_id"),
        nodes=tuple(nodes),
        edges=tuple(edges),
        mutation_log=_require_str(doc["mutation_log"], "mutation_log"),
    )


def parse_graph(text: str) -> ConstraintGraph:
    """Extract a graph from agent output, skipping any prose around it.

    The first balanced top-level object carrying all four schema keys wins
    (proposals open with an analysis preamble that may itself contain JSON
    snippets). Validation is a separate step so broken proposals can still be
    critiqued.
    """
    saw_candidate = False
    saw_decodable = False
    schema_error: SchemaError | None = None
    for decoded, _raw in iter_json_candidates(text):
        saw_candidate = True
        if decoded is None:
            continue
        saw_decodable = True
        if isinstance(decoded, dict) and all(k in decoded for k in GRAPH_KEYS):
            return graph_from_dict(decoded)
        if isinstance(decoded, dict) and not schema_error:
            missing = [k for k in GRAPH_KEYS if k not in decoded]
            schema_error = SchemaError(f"graph document missing keys: {', '.join(missing)}")
    if not saw_candidate:
        raise NoJsonFound("no balanced JSON object in text")
    if not saw_decodable:
        raise DecodeError("balanced object(s) found but none decode as JSON")
    raise schema_error or SchemaError("no JSON object carries the four graph keys")


def graph_to_dict(graph: ConstraintGraph) -> dict:
    return {
        "graph_id": graph.graph_id,
        "nodes": [
            {"id": n.id, "concept": n.concept, "description": n.description}
            for n in graph.nodes
        ],
        "edges": [
            {"source": e.source, "target": e.target, "relation": e.relation}
            for e in graph.edges
        ],
        "mutation_log": graph.mutation_log,
    }


def serialize(graph: ConstraintGraph) -> str:
    """Canonical one-line JSON rendering; field order and list order preserved."""
    return json.dumps(graph_to_dict(graph), ensure_ascii=False, separators=(",", ":"))


# --- structural validity ------------------------------------------------------

def validate(graph: ConstraintGraph) -> ValidationReport:
    """Check the structural half of validity; semantics belong to the critic.

    Rules run in a fixed order (node rules, then edge rules) and every
    violation is reported, so reports are stable for identical inputs.
    """
    violations: list[tuple[str, str]] = []
    if not graph.nodes:
        violations.append(("empty-node-set", "graph has no nodes"))
    seen_ids: set[str] = set()
    for node in graph.nodes:
        if not node.id:
            violations.append(("empty-node-id", f"node with concept {node.concept!r} has empty id"))
        elif node.id in seen_ids:
            violations.append(("duplicate-node-id", f"node id {node.id!r} appears more than once"))
        else:
            seen_ids.add(node.id)
        if not node.concept:
            violations.append(("empty-concept", f"node {node.id!r} has empty concept"))
    seen_triples: set[tuple[str, str, str]] = set()
    for edge in graph.edges:
        label = f"{edge.source!r}->{edge.target!r}"
        for endpoint in (edge.source, edge.target):
            if endpoint not in seen_ids:
                violations.append(("dangling-edge", f"edge {label} references unknown node {endpoint!r}"))
        if edge.source == edge.target:
            violations.append(("self-loop", f"edge {label} is a self-loop"))
        if not edge.relation:
            violations.append(("empty-relation", f"edge {label} has empty relation"))
        triple = (edge.source, edge.target, edge.relation)
        if triple in seen_triples:
            violations.append(("duplicate-edge", f"edge {label} ({edge.relation!r}) duplicated"))
        seen_triples.add(triple)
    return ValidationReport(violations=tuple(violations))


def _require_valid(graph: ConstraintGraph, op: str) -> None:
    report = validate(graph)
    if not report.valid:
        raise InvalidGraph(
            f"{op} requires a valid graph; rules broken: "
            + ", ".join(sorted({rule for rule, _ in report.violations})),
            violations=list(report.violations),
        )


# --- complexity score -----------------------------------------------------------

def complexity(graph: ConstraintGraph) -> int:
    """Monitoring score ``|V| + |E| + L``.

    ``L`` counts edges on the longest simple directed path; when the graph has
    cycles the path is measured on the cycle-condensed graph. The score is
    monotone in the growth moves the proposer is allowed (add concepts, add
    constraints, deepen chains); it observes evolution, it does not steer it.
    """
    _require_valid(graph, "complexity")
    dg = nx.DiGraph()
    dg.add_nodes_from(n.id for n in graph.nodes)
    dg.add_edges_from((e.source, e.target) for e in graph.edges)
    condensed = nx.condensation(dg)
    longest = nx.dag_longest_path_length(condensed)
    return len(graph.nodes) + len(graph.edges) + longest


# --- canonical text rendering ------------------------------------------------------

def linearize(graph: ConstraintGraph, style: StyleTokens) -> str:
    """Deterministic text form fed to the instantiation prompt.

    Style lines first (in their stored order), then nodes sorted by id, then
    edges sorted by (source, target, relation). Equal inputs give
    byte-identical output regardless of input list order.
    """
    _require_valid(graph, "linearize")
    lines = ["Style Tokens:"]
    lines.append(style.as_lines())
    lines.append("")
    lines.append("Nodes:")
    for node in sorted(graph.nodes, key=lambda n: n.id):
        lines.append(f"{node.id}. {node.concept}: {node.description}")
    lines.append("")
    lines.append("Edges:")
    for edge in sorted(graph.edges, key=lambda e: (e.source, e.target, e.relation)):
        lines.append(f"{edge.source} --{edge.relation}--> {edge.target}")
    return "\n".join(lines)
