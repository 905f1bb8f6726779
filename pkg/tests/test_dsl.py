import pytest

from sentinelmesh.actions import ActionRecord
from sentinelmesh.dsl import (
    ParseError,
    assert_monotone,
    check,
    check_direct,
    compile_policy,
    parse,
    parse_policy,
    pretty,
)
from sentinelmesh.graph import DISCLOSED_TO, KnowledgeGraph, NodeRecord

SOURCE = '''INVARIANT pii_guard:
  FOR entity IN graph WHERE entity.has_label("PII")
  BLOCK action WHERE action.audience IN ["external", "public"]
  MESSAGE "no personal data outside"
'''


def _blocking_graph(label="PII", audience="external"):
    nodes = {
        "doc": NodeRecord(node_id="doc", labels=frozenset({label})),
        f"audience:{audience}": NodeRecord(node_id=f"audience:{audience}",
                                           entity_kind="audience"),
    }
    edges = {("doc", f"audience:{audience}", DISCLOSED_TO)}
    return KnowledgeGraph("G", nodes, edges)


def test_parse_and_pretty_round_trip():
    ast = parse(SOURCE)
    assert ast.name == "pii_guard"
    assert parse(pretty(ast)) == ast


def test_parse_policy_multiple():
    asts = parse_policy(SOURCE + "\n" + SOURCE.replace("pii_guard", "second"))
    assert [a.name for a in asts] == ["pii_guard", "second"]


def test_parse_error_carries_position():
    with pytest.raises(ParseError) as err:
        parse("INVARIANT broken FOR entity")
    assert err.value.line == 1
    assert "expected" in str(err.value)


def test_parse_rejects_double_negation():
    bad = SOURCE.replace('entity.has_label("PII")', 'NOT NOT entity.has_label("PII")')
    with pytest.raises(ParseError):
        parse(bad)


def test_monotonicity_classification():
    inv = compile_policy(SOURCE)[0]
    assert inv.monotone
    negated = SOURCE.replace('entity.has_label("PII")', 'NOT entity.has_label("PII")')
    assert not compile_policy(negated)[0].monotone


def test_check_blocks_on_disclosure():
    inv = compile_policy(SOURCE)[0]
    action = ActionRecord(actor="a", verb="send_external", audience="external")
    assert check(inv, _blocking_graph(), action).blocked
    # same node disclosed internally is fine
    assert not check(inv, _blocking_graph(audience="internal"), action).blocked
    # unlabeled entity is fine
    assert not check(inv, _blocking_graph(label="NDA"), action).blocked


def test_check_direct_uses_grounded_set_only():
    inv = compile_policy(SOURCE)[0]
    graph = _blocking_graph()
    blocked = ActionRecord(actor="a", verb="send_external", audience="external")
    assert check_direct(inv, graph, {"doc"}, blocked).blocked
    assert not check_direct(inv, graph, set(), blocked).blocked
    internal = ActionRecord(actor="a", verb="send_email", audience="internal")
    assert not check_direct(inv, graph, {"doc"}, internal).blocked


def test_assert_monotone_requires_monotone_invariant():
    negated = SOURCE.replace('entity.has_label("PII")', 'NOT entity.has_label("PII")')
    inv = compile_policy(negated)[0]
    action = ActionRecord(actor="a", verb="send_external", audience="external")
    with pytest.raises(ValueError):
        assert_monotone(inv, _blocking_graph(), action, trials=10)


def test_assert_monotone_holds_on_guard():
    inv = compile_policy(SOURCE)[0]
    action = ActionRecord(actor="a", verb="send_external", audience="external")
    assert assert_monotone(inv, _blocking_graph(), action, trials=200, seed=7)
