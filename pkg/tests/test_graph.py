import pytest

from sentinelmesh.actions import ActionRecord
from sentinelmesh.graph import (
    DERIVED_FROM,
    DISCLOSED_TO,
    AddEdge,
    AddNode,
    KnowledgeGraph,
    Mutation,
    MutationError,
    NodeRecord,
    RecordDisclosure,
    SetAttribute,
    StaleSnapshot,
    apply_mutation,
    graph_from_dict,
    graph_to_dict,
    load_graph,
    save_graph,
    translate_to_mutation,
)
from sentinelmesh.tokens import ConstraintPredicate


def _graph():
    nodes = {
        "raw": NodeRecord(node_id="raw", labels=frozenset({"PII"})),
        "report": NodeRecord(node_id="report"),
        "summary": NodeRecord(node_id="summary"),
    }
    edges = {("report", "raw", DERIVED_FROM), ("summary", "report", DERIVED_FROM)}
    return KnowledgeGraph("TEST", nodes, edges)


def test_fork_allocates_no_node_records():
    graph = _graph()
    before = NodeRecord.allocations
    snapshot = graph.fork()
    assert NodeRecord.allocations == before
    assert snapshot.get_node("raw") is graph.get_node("raw")  # shared payload


def test_snapshot_is_isolated_until_commit():
    graph = _graph()
    snap = graph.fork()
    apply_mutation(snap, Mutation([AddNode(NodeRecord(node_id="new"))]))
    assert snap.get_node("new") is not None
    assert graph.get_node("new") is None
    graph.commit(snap)
    assert graph.get_node("new") is not None


def test_commit_bumps_version_and_stales_siblings():
    graph = _graph()
    v0 = graph.version
    first, second = graph.fork(), graph.fork()
    graph.commit(first)
    assert graph.version == v0 + 1
    with pytest.raises(StaleSnapshot):
        graph.commit(second)


def test_set_attribute_replaces_record():
    graph = _graph()
    original = graph.get_node("raw")
    snap = graph.fork()
    apply_mutation(snap, Mutation([SetAttribute("raw", "sensitivity", "HIGH")]))
    assert snap.get_node("raw").attributes["sensitivity"] == "HIGH"
    assert graph.get_node("raw") is original
    assert "sensitivity" not in original.attributes


def test_mutation_rejects_dangling_references():
    graph = _graph()
    snap = graph.fork()
    with pytest.raises(MutationError):
        apply_mutation(snap, Mutation([AddEdge("raw", "ghost", "relates_to")]))
    with pytest.raises(MutationError):
        apply_mutation(snap, Mutation([RecordDisclosure("ghost", "external")]))


def test_disclosure_closes_over_provenance():
    graph = _graph()
    snap = graph.fork()
    apply_mutation(snap, Mutation([RecordDisclosure("summary", "external")]))
    disclosed = dict(snap.disclosure_edges())
    # summary itself plus its transitive derived_from ancestors
    assert disclosed == {"summary": "external", "report": "external", "raw": "external"}


def test_provenance_ancestors():
    graph = _graph()
    assert graph.provenance_ancestors("summary") == {"report", "raw"}
    assert graph.provenance_ancestors("raw") == set()


def test_translate_disclosing_action():
    action = ActionRecord(actor="a", verb="send_external", audience="external",
                          payload_text="raw")
    mutation = translate_to_mutation(action, {"raw"})
    graph = _graph()
    snap = graph.fork()
    apply_mutation(snap, mutation)
    assert ("raw", "audience:external", DISCLOSED_TO) in set(snap.iter_edges())


def test_translate_internal_action_adds_no_disclosure():
    action = ActionRecord(actor="a", verb="summarize", payload_text="raw")
    mutation = translate_to_mutation(action, {"raw"})
    graph = _graph()
    snap = graph.fork()
    apply_mutation(snap, mutation)
    assert list(snap.disclosure_edges()) == []


def test_serialization_round_trip(tmp_path):
    node = NodeRecord(
        node_id="raw", labels=frozenset({"PII"}),
        constraints=(ConstraintPredicate("audience", "not-in", ("external",)),),
        attributes={"sensitivity": "RESTRICTED"}, aliases=("the raw",),
    )
    graph = KnowledgeGraph("G", {"raw": node}, {("raw", "raw", "relates_to")})
    clone = graph_from_dict(graph_to_dict(graph))
    assert clone.content_hash() == graph.content_hash()
    path = tmp_path / "g.json"
    save_graph(graph, path)
    assert load_graph(path).content_hash() == graph.content_hash()
