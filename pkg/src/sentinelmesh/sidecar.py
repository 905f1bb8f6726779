"""Per-domain verification sidecar.

Every agent action passes through :meth:`Sidecar.verify`, which runs a fixed
four-phase pipeline:

0. validate attached taint tokens (signature, expiry);
1. ground the payload text, fork the domain graph, and simulate the action's
   mutations on the fork;
2. evaluate local invariants and local node constraints against the simulated
   post-state — a local block never emits a single remote query;
3. answer the residual cross-domain obligations with boolean predicate
   queries to the authoritative sidecars, concurrently and deduplicated;
4. commit the fork if and only if the verdict is Allow.

Every error path (bad signature, unknown verb, malformed action, transport
timeout, schema violation) terminates in Block.
"""

from __future__ import annotations

import json
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional

from .actions import ActionRecord, MalformedAction, UnknownVerb, extract_target_scope
from .dsl import CompiledInvariant, check, check_direct
from .graph import (
    DERIVED_FROM,
    DISCLOSED_TO,
    GraphSnapshot,
    KnowledgeGraph,
    Mutation,
    MutationError,
    AddEdge,
    AddNode,
    NodeRecord,
    StaleSnapshot,
    apply_mutation,
    translate_to_mutation,
)
from .mapper import DeterministicMapper, Mapper, SessionContext
from .tokens import (
    KeyNotFound,
    KeyStore,
    TaintToken,
    issue_token,
    verify_token,
)
from .transport import TransportError
from .vocab import Vocabulary


class SchemaError(ValueError):
    """A predicate response did not match the wire contract."""


@dataclass(frozen=True)
class Reason:
    source: str   # local-invariant | cross-domain | token-expired | token-invalid | mapper-failopen | malformed-action
    rule: str
    message: str


@dataclass(frozen=True)
class PredicateQuery:
    query_id: str
    node_id: str
    scope: dict[str, Any]

    def to_wire(self) -> dict[str, Any]:
        return {"query_id": self.query_id, "node_id": self.node_id, "scope": self.scope}


@dataclass(frozen=True)
class PredicateResponse:
    query_id: str
    result: bool

    def to_wire(self) -> dict[str, Any]:
        return {"query_id": self.query_id, "result": self.result}


def validate_response_schema(wire: dict[str, Any]) -> PredicateResponse:
    """Predicate responses carry exactly a query id and a boolean; no payload
    channel exists for remote data to ride back on."""
    if not isinstance(wire, dict) or set(wire) != {"query_id", "result"}:
        raise SchemaError(f"predicate response must have exactly query_id and result, got {sorted(wire) if isinstance(wire, dict) else type(wire)}")
    if not isinstance(wire["query_id"], str) or not isinstance(wire["result"], bool):
        raise SchemaError("predicate response field types are (str, bool)")
    return PredicateResponse(wire["query_id"], wire["result"])


@dataclass
class Decision:
    verdict: str                       # "Allow" | "Block"
    reasons: list[Reason] = field(default_factory=list)
    elapsed: float = 0.0               # enforcement seconds, grounding excluded
    grounding_elapsed: float = 0.0
    breakdown: dict[str, float] = field(default_factory=dict)
    queries_sent: int = 0

    @property
    def allowed(self) -> bool:
        return self.verdict == "Allow"


@dataclass
class SidecarConfig:
    ground_threshold: float = 0.5
    token_ttl: float = 3600.0
    query_timeout: float = 0.5
    max_workers: int = 8
    # ablation switches; production deployments leave all of these alone
    enable_stt: bool = True
    enable_cross_domain: bool = True
    use_direct_check: bool = False


class _DeltaView:
    """Snapshot view restricted to disclosure facts added by this action."""

    def __init__(self, snapshot: GraphSnapshot, new_edges: set):
        self._snapshot = snapshot
        self._new_edges = new_edges

    def get_node(self, node_id: str):
        return self._snapshot.get_node(node_id)

    def disclosure_edges(self):
        for src, dst, rel in self._new_edges:
            if rel == DISCLOSED_TO and dst.startswith("audience:"):
                yield src, dst.split(":", 1)[1]


class Sidecar:
    """Verification authority for one domain."""

    def __init__(
        self,
        domain: str,
        agent: str,
        graph: KnowledgeGraph,
        keystore: KeyStore,
        invariants: Iterable[CompiledInvariant] = (),
        mapper: Optional[Mapper] = None,
        session: Optional[SessionContext] = None,
        transport=None,
        vocabulary: Optional[Vocabulary] = None,
        config: Optional[SidecarConfig] = None,
    ):
        self.domain = domain
        self.agent = agent
        self.graph = graph
        self.keystore = keystore
        self.invariants = list(invariants)
        self.mapper = mapper or DeterministicMapper()
        self.session = session or SessionContext(originating_agent=agent, originating_domain=domain)
        self.transport = transport
        self.vocabulary = vocabulary or Vocabulary()
        self.config = config or SidecarConfig()
        self.audit_log: list[dict[str, Any]] = []
        if transport is not None:
            transport.register(domain, self.handle_frame)

    # --- auditing ---

    def _audit(self, event: str, **fields: Any) -> None:
        self.audit_log.append({"ts": time.time(), "domain": self.domain, "event": event, **fields})

    def export_audit(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for entry in self.audit_log:
                fh.write(json.dumps(entry, sort_keys=True, default=str) + "\n")

    # --- predicate responder side ---

    def answer_query(self, body: dict[str, Any]) -> dict[str, Any]:
        """Answer a boolean predicate query about a local node.

        True means: under the queried scope, disclosing this node (and by
        provenance, everything it derives from) violates none of this
        domain's node constraints.  Any malformation answers False.
        """
        query_id = str(body.get("query_id", ""))
        try:
            node_id = body["node_id"]
            scope = body["scope"]
            if not isinstance(scope, dict):
                raise SchemaError("scope must be an object")
            node = self.graph.get_node(node_id)
            if node is None:
                result = False
            else:
                involved = [node] + [
                    anc for anc_id in self.graph.provenance_ancestors(node_id)
                    if (anc := self.graph.get_node(anc_id)) is not None
                ]
                result = all(
                    c.satisfied_by(scope) for n in involved for c in n.constraints
                )
        except Exception as exc:  # fail closed on anything malformed
            self._audit("query-error", query_id=query_id, error=str(exc))
            result = False
        self._audit("query-answered", query_id=query_id, result=result)
        return PredicateResponse(query_id, result).to_wire()

    def handle_frame(self, frame: dict[str, Any]) -> dict[str, Any]:
        if frame.get("type") == "predicate_query" and isinstance(frame.get("body"), dict):
            return {"type": "predicate_response", "body": self.answer_query(frame["body"])}
        return {"type": "error", "body": {"message": "unsupported frame"}}

    # --- token operations ---

    def issue(self, node_id: str, ttl: Optional[float] = None,
              inherited_lineage: tuple[str, ...] = ()) -> TaintToken:
        token = issue_token(
            node_id, self.graph, self.keystore, ttl or self.config.token_ttl,
            agent=self.agent, vocabulary=self.vocabulary,
            inherited_lineage=inherited_lineage,
        )
        self.session.mention(node_id)
        self._audit("token-issued", token_id=token.token_id, node=node_id)
        return token

    def record_derived(self, node_id: str, parent_tokens: Iterable[TaintToken],
                       local_sources: Iterable[str] = (),
                       extra_labels: Iterable[str] = (),
                       attributes: Optional[dict[str, Any]] = None,
                       aliases: Iterable[str] = ()) -> NodeRecord:
        """Materialize a derived artifact carrying the merged taint of its
        inputs, with provenance edges to any local source nodes."""
        parents = list(parent_tokens)
        labels = set(extra_labels)
        constraints: list = []
        for tok in parents:
            labels |= self.vocabulary.from_bits(list(tok.taint_vec))
            for c in tok.constraints:
                if c not in constraints:
                    constraints.append(c)
        locals_present = [s for s in local_sources if self.graph.get_node(s) is not None]
        for src in locals_present:
            src_node = self.graph.get_node(src)
            labels |= src_node.labels
            for c in src_node.constraints:
                if c not in constraints:
                    constraints.append(c)
        node = NodeRecord(
            node_id=node_id,
            entity_kind="derived",
            labels=frozenset(labels),
            constraints=tuple(constraints),
            attributes=dict(attributes or {}),
            aliases=tuple(aliases),
        )
        snap = self.graph.fork()
        ops: list = [AddNode(node)]
        ops.extend(AddEdge(node_id, src, DERIVED_FROM) for src in locals_present)
        apply_mutation(snap, Mutation(ops))
        self.graph.commit(snap)
        self.session.mention(node_id)
        return node

    def issue_derived(self, node_id: str, parent_tokens: Iterable[TaintToken],
                      ttl: Optional[float] = None) -> TaintToken:
        """Issue a fresh token for a derived local node, extending the custody
        chain of its parents.  Original tokens keep travelling alongside."""
        merged: list[str] = [self.agent]
        for tok in parent_tokens:
            for hop in tok.lineage:
                if hop not in merged:
                    merged.append(hop)
        return issue_token(
            node_id, self.graph, self.keystore, ttl or self.config.token_ttl,
            agent=self.agent, vocabulary=self.vocabulary,
            inherited_lineage=tuple(merged[1:]),
        )

    # --- verification pipeline ---

    def verify(self, action: ActionRecord) -> Decision:
        decision = Decision(verdict="Block")
        breakdown = {"fork": 0.0, "token-validation": 0.0, "local-invariants": 0.0,
                     "cross-query": 0.0, "decision": 0.0}
        decision.breakdown = breakdown
        t_total = time.perf_counter()

        def finish(verdict: str, reasons: list[Reason]) -> Decision:
            t0 = time.perf_counter()
            decision.verdict = verdict
            decision.reasons = reasons
            self._audit(
                "decision", verb=action.verb, actor=action.actor, verdict=verdict,
                reasons=[(r.source, r.rule, r.message) for r in reasons],
            )
            breakdown["decision"] += time.perf_counter() - t0
            decision.elapsed = sum(breakdown.values())
            return decision

        # Phase 0: token validation
        t0 = time.perf_counter()
        tokens: list[TaintToken] = []
        if self.config.enable_stt:
            for tok in action.attached_tokens:
                if not isinstance(tok, TaintToken):
                    breakdown["token-validation"] = time.perf_counter() - t0
                    return finish("Block", [Reason("token-invalid", "wire", "attached token is not a taint token")])
                if tok.is_expired():
                    breakdown["token-validation"] = time.perf_counter() - t0
                    return finish("Block", [Reason("token-expired", tok.token_id, "attached token has expired")])
                try:
                    valid = verify_token(tok, self.keystore)
                except KeyNotFound:
                    valid = False
                if not valid:
                    breakdown["token-validation"] = time.perf_counter() - t0
                    return finish("Block", [Reason("token-invalid", tok.token_id, "token signature does not verify")])
                tokens.append(tok)
        breakdown["token-validation"] = time.perf_counter() - t0

        # scope extraction is part of structural validation
        try:
            disclosing = action.is_disclosing
            scope = extract_target_scope(action) if disclosing else {"audience": "internal"}
        except (UnknownVerb, MalformedAction) as exc:
            return finish("Block", [Reason("malformed-action", action.verb, str(exc))])

        # Phase 1: grounding (timed separately from enforcement)
        t0 = time.perf_counter()
        try:
            grounded = self.mapper.ground(
                action.payload_text, self.graph, self.session,
                threshold=self.config.ground_threshold, disclosing=disclosing,
            )
        except Exception as exc:
            decision.grounding_elapsed = time.perf_counter() - t0
            return finish("Block", [Reason("mapper-failopen", "ground", f"grounding failed: {exc}")])
        decision.grounding_elapsed = time.perf_counter() - t0

        for attempt in (0, 1):
            # Phase 1 (continued): fork and simulate
            t0 = time.perf_counter()
            try:
                snapshot = self.graph.fork()
                mutation = translate_to_mutation(action, grounded)
                apply_mutation(snapshot, mutation)
            except (UnknownVerb, MalformedAction, MutationError) as exc:
                breakdown["fork"] += time.perf_counter() - t0
                return finish("Block", [Reason("malformed-action", action.verb, str(exc))])
            new_edges = snapshot._added_edges - self.graph._edges
            breakdown["fork"] += time.perf_counter() - t0

            # Phase 2: local invariants and node constraints on the post-state
            t0 = time.perf_counter()
            reasons: list[Reason] = []
            delta = _DeltaView(snapshot, new_edges)
            for inv in self.invariants:
                if self.config.use_direct_check:
                    verdict = check_direct(inv, self.graph, grounded, action) if disclosing \
                        else check_direct(inv, self.graph, (), action)
                else:
                    verdict = check(inv, delta, action)
                if verdict.blocked:
                    reasons.append(Reason("local-invariant", inv.name, inv.message))
            if self.config.use_direct_check:
                disclosed_pairs = [(n, scope.get("audience", "internal")) for n in grounded] if disclosing else []
            else:
                disclosed_pairs = list(delta.disclosure_edges())
            for node_id, audience in disclosed_pairs:
                node = snapshot.get_node(node_id)
                if node is None:
                    continue
                node_scope = {**scope, "audience": audience}
                for c in node.constraints:
                    if not c.satisfied_by(node_scope):
                        reasons.append(Reason(
                            "local-invariant", f"constraint:{node_id}",
                            f"node constraint on {c.attribute} forbids this scope",
                        ))
                        break
            breakdown["local-invariants"] += time.perf_counter() - t0
            if reasons:
                return finish("Block", reasons)  # no remote query was emitted

            # Phase 3: residual cross-domain obligations
            if disclosing and self.config.enable_cross_domain and tokens:
                t0 = time.perf_counter()
                ok, cross_reasons, sent = self.cross_domain_verify(tokens, scope)
                decision.queries_sent += sent
                breakdown["cross-query"] += time.perf_counter() - t0
                if not ok:
                    return finish("Block", cross_reasons)

            # Phase 4: commit on Allow
            t0 = time.perf_counter()
            try:
                self.graph.commit(snapshot)
            except StaleSnapshot:
                breakdown["decision"] += time.perf_counter() - t0
                if attempt == 0:
                    continue  # one re-verification against the advanced graph
                return finish("Block", [Reason("local-invariant", "stale", "graph advanced during verification")])
            breakdown["decision"] += time.perf_counter() - t0
            for node_id in grounded:
                self.session.mention(node_id)
            return finish("Allow", [])

        return finish("Block", [Reason("local-invariant", "stale", "graph advanced during verification")])

    def cross_domain_verify(self, tokens: list[TaintToken], scope: dict[str, Any]
                            ) -> tuple[bool, list[Reason], int]:
        """Fan out deduplicated boolean predicate queries for foreign-origin
        tokens.  Any False, timeout, or schema violation fails the whole set."""
        obligations: dict[tuple[str, str], PredicateQuery] = {}
        for tok in tokens:
            key = (tok.source_domain, tok.source_node)
            if key not in obligations:
                obligations[key] = PredicateQuery(uuid.uuid4().hex, tok.source_node, dict(scope))

        reasons: list[Reason] = []
        sent = 0

        local = [(d, q) for (d, _n), q in obligations.items() if d == self.domain]
        remote = [(d, q) for (d, _n), q in obligations.items() if d != self.domain]

        for _domain, query in local:
            response = validate_response_schema(self.answer_query(query.to_wire()))
            if not response.result:
                reasons.append(Reason("cross-domain", query.node_id,
                                      f"domain {self.domain} denies disclosure under this scope"))

        if remote:
            if self.transport is None:
                reasons.append(Reason("cross-domain", "transport", "no transport configured for remote obligations"))
            else:
                def ask(item):
                    domain, query = item
                    frame = {"type": "predicate_query", "body": query.to_wire()}
                    reply = self.transport.ask(domain, frame, timeout=self.config.query_timeout)
                    if reply.get("type") != "predicate_response":
                        raise SchemaError("peer returned a non-response frame")
                    return domain, query, validate_response_schema(reply.get("body", {}))

                sent = len(remote)
                with ThreadPoolExecutor(max_workers=min(self.config.max_workers, len(remote))) as pool:
                    futures = [pool.submit(ask, item) for item in remote]
                    deadline = time.monotonic() + self.config.query_timeout
                    for future, (domain, query) in zip(futures, remote):
                        budget = max(0.0, deadline - time.monotonic())
                        try:
                            _domain, _query, response = future.result(timeout=budget + 0.05)
                        except Exception as exc:
                            reasons.append(Reason("cross-domain", query.node_id,
                                                  f"query to {domain} failed closed: {exc}"))
                            continue
                        if not response.result:
                            reasons.append(Reason("cross-domain", query.node_id,
                                                  f"domain {domain} denies disclosure under this scope"))

        return (not reasons, reasons, sent)
