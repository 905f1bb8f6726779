import time
from dataclasses import replace

import pytest

from sentinelmesh.actions import ActionRecord
from sentinelmesh.dsl import compile_policy
from sentinelmesh.graph import KnowledgeGraph, NodeRecord
from sentinelmesh.mapper import ExactStringMapper, SessionContext
from sentinelmesh.sidecar import (
    PredicateResponse,
    SchemaError,
    Sidecar,
    validate_response_schema,
)
from sentinelmesh.tokens import ConstraintPredicate, KeyStore, sign_token
from sentinelmesh.transport import InProcessTransport

POLICY = '''INVARIANT pii_guard:
  FOR entity IN graph WHERE entity.has_label("PII")
  BLOCK action WHERE action.audience IN ["external", "public", "partner"]
  MESSAGE "no personal data outside"
'''


def _nodes(prefix):
    restricted = ConstraintPredicate("audience", "not-in", ("external", "public", "partner"))
    return {
        f"{prefix}_secret": NodeRecord(node_id=f"{prefix}_secret",
                                       labels=frozenset({"PII"}),
                                       constraints=(restricted,)),
        f"{prefix}_memo": NodeRecord(node_id=f"{prefix}_memo"),
    }


def _sidecar(domain, keystore, transport, config=None):
    graph = KnowledgeGraph(domain, _nodes(domain.lower()))
    session = SessionContext(originating_agent=f"{domain.lower()}_agent",
                             originating_domain=domain)
    return Sidecar(domain, f"{domain.lower()}_agent", graph, keystore,
                   invariants=compile_policy(POLICY), mapper=ExactStringMapper(),
                   session=session, transport=transport, config=config)


@pytest.fixture()
def pair():
    keystore = KeyStore()
    keystore.generate("A")
    keystore.generate("B")
    transport = InProcessTransport()
    return _sidecar("A", keystore, transport), _sidecar("B", keystore, transport), transport


def test_local_block_emits_zero_queries(pair):
    a, _b, transport = pair
    action = ActionRecord(actor=a.agent, verb="send_external", audience="external",
                          payload_text="leaking the a secret now",
                          attached_tokens=[a.issue("a_secret")])
    decision = a.verify(action)
    assert decision.verdict == "Block"
    assert any(r.source == "local-invariant" for r in decision.reasons)
    assert decision.queries_sent == 0
    assert transport.query_count == 0  # blocked before any remote traffic


def test_internal_disclosure_allowed_and_committed(pair):
    a, _b, _t = pair
    v0 = a.graph.version
    action = ActionRecord(actor=a.agent, verb="send_email", audience="internal",
                          payload_text="sharing the a secret with the team")
    decision = a.verify(action)
    assert decision.verdict == "Allow"
    assert a.graph.version == v0 + 1


def test_cross_domain_deny(pair):
    a, b, transport = pair
    token = b.issue("b_secret")
    action = ActionRecord(actor=a.agent, verb="send_external", audience="external",
                          payload_text="totally unrelated text",
                          attached_tokens=[token])
    decision = a.verify(action)
    assert decision.verdict == "Block"
    assert any(r.source == "cross-domain" for r in decision.reasons)
    assert decision.queries_sent == 1
    assert transport.per_domain == {"B": 1}


def test_cross_domain_allow_for_internal_scope(pair):
    a, b, _t = pair
    action = ActionRecord(actor=a.agent, verb="send_email", audience="internal",
                          payload_text="no grounding here",
                          attached_tokens=[b.issue("b_secret")])
    assert a.verify(action).verdict == "Allow"


def test_duplicate_tokens_deduplicate_queries(pair):
    a, b, transport = pair
    tokens = [b.issue("b_secret"), b.issue("b_secret")]
    action = ActionRecord(actor=a.agent, verb="send_external", audience="external",
                          payload_text="unrelated", attached_tokens=tokens)
    decision = a.verify(action)
    assert decision.verdict == "Block"
    assert transport.query_count == 1


def test_expired_token_blocks_fail_closed(pair):
    a, b, _t = pair
    from sentinelmesh.tokens import issue_token
    expired = issue_token("b_secret", b.graph, b.keystore, 10,
                          agent=b.agent, vocabulary=b.vocabulary,
                          now=time.time() - 3600)
    action = ActionRecord(actor=a.agent, verb="send_email", audience="internal",
                          payload_text="x", attached_tokens=[expired])
    decision = a.verify(action)
    assert decision.verdict == "Block"
    assert decision.reasons[0].source == "token-expired"


def test_tampered_token_blocks(pair):
    a, b, _t = pair
    token = b.issue("b_secret")
    bits = list(token.taint_vec)
    bits[0] ^= 1
    action = ActionRecord(actor=a.agent, verb="send_email", audience="internal",
                          payload_text="x",
                          attached_tokens=[replace(token, taint_vec=tuple(bits))])
    decision = a.verify(action)
    assert decision.verdict == "Block"
    assert decision.reasons[0].source == "token-invalid"


def test_forged_token_blocks(pair):
    a, b, _t = pair
    rogue = KeyStore()
    rogue.generate("B")
    forged = sign_token(b.issue("b_secret"), rogue)
    action = ActionRecord(actor=a.agent, verb="send_email", audience="internal",
                          payload_text="x", attached_tokens=[forged])
    assert a.verify(action).reasons[0].source == "token-invalid"


def test_malformed_action_blocks(pair):
    a, _b, _t = pair
    no_audience = ActionRecord(actor=a.agent, verb="send_email", payload_text="x")
    decision = a.verify(no_audience)
    assert decision.verdict == "Block"
    assert decision.reasons[0].source == "malformed-action"
    unknown = ActionRecord(actor=a.agent, verb="teleport", payload_text="x")
    assert a.verify(unknown).reasons[0].source == "malformed-action"


def test_breakdown_covers_all_phases(pair):
    a, _b, _t = pair
    action = ActionRecord(actor=a.agent, verb="send_email", audience="internal",
                          payload_text="hello")
    decision = a.verify(action)
    assert set(decision.breakdown) == {
        "fork", "token-validation", "local-invariants", "cross-query", "decision"}
    assert decision.elapsed == pytest.approx(sum(decision.breakdown.values()))


def test_answer_query_checks_provenance_ancestors(pair):
    a, _b, _t = pair
    parent = a.issue("a_secret")
    a.record_derived("brief", [], local_sources=["a_secret"])
    denied = a.answer_query({"query_id": "q1", "node_id": "brief",
                             "scope": {"audience": "external"}})
    assert denied == {"query_id": "q1", "result": False}
    allowed = a.answer_query({"query_id": "q2", "node_id": "brief",
                              "scope": {"audience": "internal"}})
    assert allowed["result"] is True
    # malformed queries fail closed
    assert a.answer_query({"query_id": "q3"})["result"] is False
    assert parent.source_node == "a_secret"


def test_record_derived_merges_taint_and_constraints(pair):
    a, b, _t = pair
    token = b.issue("b_secret")
    node = a.record_derived("combined", [token], local_sources=["a_memo"])
    assert node.labels == {"PII"}
    assert node.constraints == token.constraints
    derived = a.issue_derived("combined", [token])
    assert derived.lineage == (a.agent, b.agent)


def test_schema_validator():
    ok = validate_response_schema({"query_id": "q", "result": True})
    assert isinstance(ok, PredicateResponse) and ok.result is True
    for bad in (
        {"query_id": "q"},                                  # missing field
        {"query_id": "q", "result": True, "extra": 1},      # extra field
        {"query_id": 7, "result": True},                    # wrong type
        {"query_id": "q", "result": "yes"},                 # wrong type
        {"query_id": "q", "result": 1},                     # bool strictness
    ):
        with pytest.raises(SchemaError):
            validate_response_schema(bad)


def test_stale_snapshot_retries_once(pair):
    a, _b, _t = pair
    # interleave: a commit from elsewhere lands between fork and commit
    original_fork = a.graph.fork
    calls = {"n": 0}

    def racing_fork():
        snap = original_fork()
        if calls["n"] == 0:
            calls["n"] += 1
            other = original_fork()
            a.graph.commit(other)  # advance the version under the first fork
        return snap

    a.graph.fork = racing_fork
    action = ActionRecord(actor=a.agent, verb="send_email", audience="internal",
                          payload_text="hello")
    decision = a.verify(action)
    assert decision.verdict == "Allow"


def test_audit_log_export(pair, tmp_path):
    a, _b, _t = pair
    a.verify(ActionRecord(actor=a.agent, verb="send_email", audience="internal",
                          payload_text="hello"))
    path = tmp_path / "audit.jsonl"
    a.export_audit(path)
    lines = path.read_text().strip().splitlines()
    assert lines and all(line.startswith("{") for line in lines)
