"""Per-domain knowledge graph with copy-on-write snapshots.

The committed graph is the single source of truth for a domain.  Verification
never mutates it directly: the pipeline forks a snapshot, simulates the
action's mutations there, and commits only on Allow.  Snapshots share node
payloads with the parent (copy-on-write at node granularity) so forking is
O(1) in graph size.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Iterator, Optional, Union

from .actions import ActionRecord, extract_target_scope
from .tokens import ConstraintPredicate, constraints_from_wire, constraints_to_wire

DERIVED_FROM = "derived_from"
DISCLOSED_TO = "disclosed_to"


def audience_node_id(audience: str) -> str:
    return f"audience:{audience}"


class MutationError(ValueError):
    """A mutation op referenced an id that does not resolve."""


class StaleSnapshot(RuntimeError):
    """The parent graph advanced after this snapshot was forked."""


@dataclass(frozen=True)
class NodeRecord:
    """One entity in a domain graph.  Treated as immutable; updates replace."""

    node_id: str
    entity_kind: str = "entity"
    labels: frozenset[str] = frozenset()
    constraints: tuple[ConstraintPredicate, ...] = ()
    attributes: dict[str, Any] = field(default_factory=dict)
    aliases: tuple[str, ...] = ()

    # instrumentation for the zero-copy fork check
    allocations = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "labels", frozenset(self.labels))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        object.__setattr__(self, "aliases", tuple(self.aliases))
        NodeRecord.allocations += 1


Edge = tuple[str, str, str]  # (src node, dst node, relation)


# Mutation ops

@dataclass(frozen=True)
class AddNode:
    node: NodeRecord


@dataclass(frozen=True)
class AddEdge:
    src: str
    dst: str
    relation: str


@dataclass(frozen=True)
class SetAttribute:
    node_id: str
    name: str
    value: Any


@dataclass(frozen=True)
class RecordDisclosure:
    node_id: str
    audience: str


MutationOp = Union[AddNode, AddEdge, SetAttribute, RecordDisclosure]


@dataclass
class Mutation:
    ops: list[MutationOp] = field(default_factory=list)


class _GraphReadMixin:
    """Read API shared by committed graphs and snapshots."""

    def get_node(self, node_id: str) -> Optional[NodeRecord]:
        raise NotImplementedError

    def iter_nodes(self) -> Iterator[NodeRecord]:
        raise NotImplementedError

    def iter_edges(self) -> Iterator[Edge]:
        raise NotImplementedError

    def node_count(self) -> int:
        return sum(1 for _ in self.iter_nodes())

    def disclosure_edges(self) -> Iterator[tuple[str, str]]:
        """Yield (node_id, audience) pairs for every disclosure fact."""
        for src, dst, rel in self.iter_edges():
            if rel == DISCLOSED_TO and dst.startswith("audience:"):
                yield src, dst.split(":", 1)[1]

    def provenance_ancestors(self, node_id: str) -> set[str]:
        """Transitive sources of ``node_id`` along derived_from edges."""
        out: dict[str, set[str]] = {}
        for src, dst, rel in self.iter_edges():
            if rel == DERIVED_FROM:
                out.setdefault(src, set()).add(dst)
        seen: set[str] = set()
        stack = list(out.get(node_id, ()))
        while stack:
            cur = stack.pop()
            if cur in seen:
                continue
            seen.add(cur)
            stack.extend(out.get(cur, ()))
        return seen

    def content_hash(self) -> str:
        payload = {
            "nodes": sorted(_node_to_dict(n) for n in self.iter_nodes()),
            "edges": sorted(list(e) for e in self.iter_edges()),
        }
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class KnowledgeGraph(_GraphReadMixin):
    """Committed per-domain graph; mutated only through fork/commit."""

    def __init__(self, graph_id: str, nodes: Optional[dict[str, NodeRecord]] = None,
                 edges: Optional[Iterable[Edge]] = None, version: int = 0):
        self.graph_id = graph_id
        self._nodes: dict[str, NodeRecord] = dict(nodes or {})
        self._edges: set[Edge] = set(edges or ())
        self.version = version
        for src, dst, _rel in self._edges:
            if src not in self._nodes or dst not in self._nodes:
                raise MutationError(f"edge ({src}, {dst}) has a dangling endpoint")

    def get_node(self, node_id: str) -> Optional[NodeRecord]:
        return self._nodes.get(node_id)

    def iter_nodes(self) -> Iterator[NodeRecord]:
        return iter(self._nodes.values())

    def iter_edges(self) -> Iterator[Edge]:
        return iter(self._edges)

    def node_count(self) -> int:
        return len(self._nodes)

    def fork(self) -> "GraphSnapshot":
        """Copy-on-write snapshot; shares every node payload with the parent."""
        return GraphSnapshot(self)

    def commit(self, snapshot: "GraphSnapshot") -> "KnowledgeGraph":
        if snapshot.parent is not self or snapshot.parent_version != self.version:
            raise StaleSnapshot(
                f"snapshot forked at version {snapshot.parent_version}, "
                f"graph is at {self.version}"
            )
        self._nodes = {**self._nodes, **snapshot._overlay}
        self._edges = self._edges | snapshot._added_edges
        self.version += 1
        return self

    def copy(self, graph_id: Optional[str] = None) -> "KnowledgeGraph":
        """Independent graph sharing node payloads (nodes are immutable)."""
        return KnowledgeGraph(graph_id or self.graph_id, dict(self._nodes),
                              set(self._edges), self.version)


class GraphSnapshot(_GraphReadMixin):
    """Mutable overlay over a committed graph."""

    def __init__(self, parent: KnowledgeGraph):
        self.parent = parent
        self.parent_version = parent.version
        self.graph_id = parent.graph_id
        self._overlay: dict[str, NodeRecord] = {}
        self._added_edges: set[Edge] = set()

    def get_node(self, node_id: str) -> Optional[NodeRecord]:
        if node_id in self._overlay:
            return self._overlay[node_id]
        return self.parent.get_node(node_id)

    def iter_nodes(self) -> Iterator[NodeRecord]:
        for node_id, node in self.parent._nodes.items():
            yield self._overlay.get(node_id, node)
        for node_id, node in self._overlay.items():
            if node_id not in self.parent._nodes:
                yield node

    def iter_edges(self) -> Iterator[Edge]:
        yield from self.parent._edges
        for edge in self._added_edges:
            if edge not in self.parent._edges:
                yield edge


def apply_mutation(snapshot: GraphSnapshot, mutation: Mutation) -> GraphSnapshot:
    """Apply ops in order; on any dangling reference the snapshot is unchanged."""
    overlay = dict(snapshot._overlay)
    edges = set(snapshot._added_edges)

    def resolve(node_id: str) -> Optional[NodeRecord]:
        if node_id in overlay:
            return overlay[node_id]
        return snapshot.parent.get_node(node_id)

    for op in mutation.ops:
        if isinstance(op, AddNode):
            overlay[op.node.node_id] = op.node
        elif isinstance(op, AddEdge):
            if resolve(op.src) is None or resolve(op.dst) is None:
                raise MutationError(f"add-edge references unknown node in ({op.src}, {op.dst})")
            edges.add((op.src, op.dst, op.relation))
        elif isinstance(op, SetAttribute):
            node = resolve(op.node_id)
            if node is None:
                raise MutationError(f"set-attribute on unknown node {op.node_id!r}")
            overlay[op.node_id] = replace(
                node, attributes={**node.attributes, op.name: op.value}
            )
        elif isinstance(op, RecordDisclosure):
            node = resolve(op.node_id)
            if node is None:
                raise MutationError(f"record-disclosure on unknown node {op.node_id!r}")
            aud_id = audience_node_id(op.audience)
            if resolve(aud_id) is None:
                overlay[aud_id] = NodeRecord(aud_id, entity_kind="audience")
            # Disclosing a node discloses everything it derives from: taint
            # follows provenance, so the sources count as disclosed too.
            targets = {op.node_id} | _ancestors(snapshot.parent, overlay, edges, op.node_id)
            for target in targets:
                edges.add((target, aud_id, DISCLOSED_TO))
        else:
            raise MutationError(f"unknown mutation op {op!r}")

    snapshot._overlay = overlay
    snapshot._added_edges = edges
    return snapshot


def _ancestors(parent: KnowledgeGraph, overlay: dict, edges: set[Edge], node_id: str) -> set[str]:
    adjacency: dict[str, set[str]] = {}
    for src, dst, rel in list(parent._edges) + list(edges):
        if rel == DERIVED_FROM:
            adjacency.setdefault(src, set()).add(dst)
    seen: set[str] = set()
    stack = list(adjacency.get(node_id, ()))
    while stack:
        cur = stack.pop()
        if cur in seen:
            continue
        seen.add(cur)
        stack.extend(adjacency.get(cur, ()))
    return seen


def translate_to_mutation(action: ActionRecord, grounded: Iterable[str]) -> Mutation:
    """Turn an action into graph mutations over its grounded entities.

    Disclosing verbs record one disclosure per grounded node; internal verbs
    produce no disclosure facts.  Unknown verbs raise so callers fail closed.
    """
    spec = action.verb_spec()  # raises UnknownVerb
    ops: list[MutationOp] = []
    if spec.disclosing:
        audience = extract_target_scope(action)["audience"]
        for node_id in sorted(set(grounded)):
            ops.append(RecordDisclosure(node_id, audience))
    return Mutation(ops)


# graph file format

def _node_to_dict(node: NodeRecord) -> str:
    return json.dumps(
        {
            "node_id": node.node_id,
            "entity_kind": node.entity_kind,
            "labels": sorted(node.labels),
            "constraints": constraints_to_wire(node.constraints),
            "attributes": node.attributes,
            "aliases": list(node.aliases),
        },
        sort_keys=True,
        separators=(",", ":"),
        default=str,
    )


def graph_to_dict(graph: KnowledgeGraph) -> dict[str, Any]:
    return {
        "graph_id": graph.graph_id,
        "version": graph.version,
        "nodes": [json.loads(_node_to_dict(n)) for n in sorted(graph.iter_nodes(), key=lambda n: n.node_id)],
        "edges": sorted(list(e) for e in graph.iter_edges()),
    }


def graph_from_dict(data: dict[str, Any]) -> KnowledgeGraph:
    nodes = {}
    for nd in data["nodes"]:
        node = NodeRecord(
            node_id=nd["node_id"],
            entity_kind=nd.get("entity_kind", "entity"),
            labels=frozenset(nd.get("labels", ())),
            constraints=tuple(constraints_from_wire(nd.get("constraints", {}))),
            attributes=dict(nd.get("attributes", {})),
            aliases=tuple(nd.get("aliases", ())),
        )
        nodes[node.node_id] = node
    edges = {tuple(e) for e in data.get("edges", ())}
    return KnowledgeGraph(data["graph_id"], nodes, edges, data.get("version", 0))


def save_graph(graph: KnowledgeGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(graph_to_dict(graph), fh, sort_keys=True, separators=(",", ":"))


def load_graph(path) -> KnowledgeGraph:
    with open(path, encoding="utf-8") as fh:
        return graph_from_dict(json.load(fh))
