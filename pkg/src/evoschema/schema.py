"""Typed schema graph: a rooted two-level taxonomy of extraction types.

A graph holds entity types, relations, event types and argument roles as
named nodes under a single root, plus the task-specific constraints that
make structured decoding well-formed: (head type, relation, tail type)
triples for relation extraction and per-event-type role lists for event
extraction. Graphs are value objects: construct once, never mutate;
every evolution step returns a new graph with the version bumped by one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

TASKS = ("NER", "RE", "EE")
LEVELS = ("root", "major", "sub")
ROLES = ("entity-type", "relation", "event-type", "arg-role")

# which node role carries a task's gold labels (and is grown/renamed)
PRIMARY_ROLE = {"NER": "entity-type", "RE": "relation", "EE": "event-type"}

ROOT_ID = "root"


class SchemaError(ValueError):
    """Raised for malformed schema files and illegal schema edits."""


def name_tokens(name: str | list[str] | tuple[str, ...]) -> tuple[str, ...]:
    """Canonical name form: lowercase whitespace-separated tokens."""
    if isinstance(name, str):
        parts = name.split()
    else:
        parts = [p for tok in name for p in str(tok).split()]
    return tuple(p.lower() for p in parts)


def name_key(name: str | list[str] | tuple[str, ...]) -> str:
    return " ".join(name_tokens(name))


@dataclass(frozen=True)
class SchemaNode:
    id: str
    name: tuple[str, ...]
    parent: str | None
    level: str
    role: str

    @property
    def display(self) -> str:
        return " ".join(self.name)


@dataclass
class SchemaGraph:
    task: str
    nodes: dict[str, SchemaNode]
    re_constraints: frozenset[tuple[str, str, str]] = frozenset()
    ee_roles: dict[str, tuple[str, ...]] = field(default_factory=dict)
    version: int = 0

    def __post_init__(self):
        self._by_name = {name_key(n.name): n.id for n in self.nodes.values()}

    @property
    def primary_role(self) -> str:
        return PRIMARY_ROLE[self.task]

    def node(self, node_id: str) -> SchemaNode:
        return self.nodes[node_id]

    def find_name(self, name: str | tuple[str, ...]) -> str | None:
        """Node id whose name matches (case-insensitive tokens), or None."""
        return self._by_name.get(name_key(name))

    def ids_by(self, role: str | None = None, level: str | None = None) -> list[str]:
        out = []
        for nid, n in self.nodes.items():
            if role is not None and n.role != role:
                continue
            if level is not None and n.level != level:
                continue
            out.append(nid)
        return out

    def sub_ids(self, role: str | None = None) -> list[str]:
        return self.ids_by(role=role or self.primary_role, level="sub")

    def names(self, role: str | None = None) -> set[str]:
        return {name_key(n.name) for n in self.nodes.values()
                if role is None or n.role == role}

    def ancestors_or_self(self, node_id: str) -> list[str]:
        """Chain [self, parent, ...] up to but excluding the root."""
        chain = []
        cur: str | None = node_id
        seen = set()
        while cur is not None and cur in self.nodes and cur not in seen:
            node = self.nodes[cur]
            if node.level == "root":
                break
            chain.append(cur)
            seen.add(cur)
            cur = node.parent
        return chain

    def with_version(self, version: int) -> "SchemaGraph":
        return SchemaGraph(self.task, dict(self.nodes), self.re_constraints,
                           dict(self.ee_roles), version)


def make_root() -> SchemaNode:
    return SchemaNode(id=ROOT_ID, name=("root",), parent=None,
                      level="root", role="entity-type")


def validate(graph: SchemaGraph) -> list[str]:
    """Check every structural invariant; return one message per violation.

    Total: never raises, an empty list means the graph is well-formed.
    """
    violations: list[str] = []
    if graph.task not in TASKS:
        violations.append(f"unknown task: {graph.task}")

    roots = [n for n in graph.nodes.values() if n.level == "root"]
    if len(roots) != 1:
        violations.append(f"expected exactly one root node, found {len(roots)}")

    seen_names: dict[str, str] = {}
    for nid, node in graph.nodes.items():
        if node.id != nid:
            violations.append(f"node keyed by wrong id: {nid}")
        if not node.name:
            violations.append(f"empty name: {nid}")
        if any((not tok) or any(c.isspace() for c in tok) for tok in node.name):
            violations.append(f"name token contains whitespace: {nid}")
        if node.level not in LEVELS:
            violations.append(f"unknown level on {nid}: {node.level}")
        if node.role not in ROLES:
            violations.append(f"unknown role on {nid}: {node.role}")
        key = name_key(node.name)
        if key in seen_names:
            violations.append(f"duplicate name: {key}")
        else:
            seen_names[key] = nid

        if node.level == "root":
            if node.parent is not None:
                violations.append(f"root node has a parent: {nid}")
            continue
        if node.parent is None:
            violations.append(f"missing parent: {nid}")
            continue
        if node.parent not in graph.nodes:
            violations.append(f"dangling parent: {nid}")
            continue
        parent = graph.nodes[node.parent]
        if node.level == "sub" and parent.level != "major":
            violations.append(f"sub node not under a major: {nid}")
        if node.level == "major" and parent.level != "root":
            violations.append(f"major node not under the root: {nid}")

    # parent chains must reach the root without cycles
    for nid in graph.nodes:
        cur = nid
        hops = 0
        while cur is not None:
            node = graph.nodes.get(cur)
            if node is None:
                break  # dangling parent already reported
            if node.level == "root":
                break
            cur = node.parent
            hops += 1
            if hops > len(graph.nodes):
                violations.append(f"parent cycle through: {nid}")
                break

    for h, r, t in sorted(graph.re_constraints):
        for ref in (h, r, t):
            if ref not in graph.nodes:
                violations.append(f"unknown re_constraint reference: {ref}")
    for evt, roles in sorted(graph.ee_roles.items()):
        if evt not in graph.nodes:
            violations.append(f"unknown ee_roles event type: {evt}")
        for role in roles:
            if role not in graph.nodes:
                violations.append(f"unknown ee_roles role: {role}")
    return violations


def project_label(raw_label: str, raw: SchemaGraph, current: SchemaGraph) -> str | None:
    """Map a raw-taxonomy node onto the deepest name-matching node of `current`.

    Walks the ancestor-or-self chain of `raw_label` inside the raw taxonomy
    and returns the id (in `current`) of the first chain member whose name
    exists in `current`; None when the whole chain is absent.
    """
    if raw_label not in raw.nodes:
        raise SchemaError(f"label not in raw taxonomy: {raw_label}")
    for candidate in raw.ancestors_or_self(raw_label):
        hit = current.find_name(raw.nodes[candidate].name)
        if hit is not None and current.nodes[hit].level != "root":
            return hit
    return None


class LabelProjector:
    """Memoized projection of raw labels onto one schema snapshot.

    Accepts raw labels either as node ids or as name strings; results are
    cached per raw id, which is sound because both graphs are immutable.
    """

    def __init__(self, raw: SchemaGraph, current: SchemaGraph):
        self.raw = raw
        self.current = current
        self._memo: dict[str, str | None] = {}

    def project(self, raw_label: str) -> str | None:
        if raw_label not in self._memo:
            self._memo[raw_label] = project_label(raw_label, self.raw, self.current)
        return self._memo[raw_label]

    def project_name(self, label: str) -> str | None:
        """Project a label given by name; returns the projected node's name."""
        raw_id = self.raw.find_name(label)
        if raw_id is None:
            raise SchemaError(f"label not in raw taxonomy: {label}")
        target = self.project(raw_id)
        if target is None:
            return None
        return name_key(self.current.nodes[target].name)


def apply_rename(graph: SchemaGraph, mapping: dict[str, str]) -> SchemaGraph:
    """Rewrite node names in place (ids stable), bumping the version.

    `mapping` sends old names to new names, both given as strings of
    whitespace-separated tokens. Every old name must exist and no new name
    may collide with a name that survives the rename.
    """
    norm = {name_key(old): name_tokens(new) for old, new in mapping.items()}
    unknown = sorted(k for k in norm if graph.find_name(k) is None)
    if unknown:
        raise SchemaError(f"rename of unknown name(s): {', '.join(unknown)}")

    surviving = {name_key(n.name) for n in graph.nodes.values()} - set(norm)
    new_keys: set[str] = set()
    for old, new in sorted(norm.items()):
        key = name_key(new)
        if not key:
            raise SchemaError(f"rename to empty name: {old}")
        if key in surviving or key in new_keys:
            raise SchemaError(f"rename collision on name: {key}")
        new_keys.add(key)

    nodes = {}
    for nid, node in graph.nodes.items():
        key = name_key(node.name)
        if key in norm:
            nodes[nid] = replace(node, name=norm[key])
        else:
            nodes[nid] = node
    return SchemaGraph(graph.task, nodes, graph.re_constraints,
                       dict(graph.ee_roles), graph.version + 1)


def to_dict(graph: SchemaGraph) -> dict:
    """JSON form with exact interchange field names."""
    nodes = []
    for nid in sorted(graph.nodes):
        n = graph.nodes[nid]
        nodes.append({"id": n.id, "name": " ".join(n.name), "parent": n.parent,
                      "level": n.level, "role": n.role})
    out = {
        "task": graph.task,
        "nodes": nodes,
        "re_constraints": [list(c) for c in sorted(graph.re_constraints)],
        "version": graph.version,
    }
    if graph.ee_roles:
        out["ee_roles"] = {evt: list(roles)
                           for evt, roles in sorted(graph.ee_roles.items())}
    return out


def from_dict(data: dict) -> SchemaGraph:
    try:
        task = data["task"]
        raw_nodes = data["nodes"]
    except KeyError as exc:
        raise SchemaError(f"schema file missing field: {exc.args[0]}") from None
    nodes: dict[str, SchemaNode] = {}
    for entry in raw_nodes:
        level = entry.get("level")
        if level not in LEVELS:
            raise SchemaError(f"unsupported taxonomy level: {level!r} "
                              f"(only root/major/sub hierarchies are accepted)")
        node = SchemaNode(
            id=str(entry["id"]),
            name=name_tokens(entry["name"]),
            parent=entry.get("parent"),
            level=level,
            role=entry.get("role", "entity-type"),
        )
        if node.id in nodes:
            raise SchemaError(f"duplicate node id: {node.id}")
        nodes[node.id] = node
    constraints = frozenset(tuple(c) for c in data.get("re_constraints", []))
    ee_roles = {evt: tuple(roles)
                for evt, roles in data.get("ee_roles", {}).items()}
    graph = SchemaGraph(task, nodes, constraints, ee_roles,
                        int(data.get("version", 0)))
    problems = validate(graph)
    if problems:
        raise SchemaError("invalid schema: " + "; ".join(problems))
    return graph


def save_json(graph: SchemaGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_dict(graph), fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")


def load_json(path) -> SchemaGraph:
    with open(path, encoding="utf-8") as fh:
        return from_dict(json.load(fh))
