"""End-to-end acceptance suite.

Each test pins one externally-stated guarantee of the system: baseline
calibration, detection quality, ablation ordering, formal properties
(monotonicity, oracle equivalence, taint superset), token integrity, schema
strictness, homomorphic counting, checker agreement, latency, and scaling.
"""

import json
import random
import time

import pytest

from sentinelmesh.actions import AUDIENCES, ActionRecord
from sentinelmesh.bench.generate import generate
from sentinelmesh.bench.mesh import load_default_invariants
from sentinelmesh.bench.methods import (
    BREAKDOWN_KEYS,
    run_method,
    run_sentinel,
    scalability_sweep,
)
from sentinelmesh.dsl import assert_monotone, compile_policy
from sentinelmesh.graph import DISCLOSED_TO, KnowledgeGraph, NodeRecord
from sentinelmesh.mapper import ExactStringMapper, SessionContext
from sentinelmesh.policy import agreement, evaluate
from sentinelmesh.privacy import generate_keypair, he_aggregate_count, decrypt_aggregate
from sentinelmesh.sidecar import SchemaError, Sidecar, validate_response_schema
from sentinelmesh.tokens import (
    ConstraintPredicate,
    KeyStore,
    issue_token,
    token_from_wire,
    token_to_wire,
    verify_token,
)
from sentinelmesh.transport import InProcessTransport
from sentinelmesh.vocab import Vocabulary

CROSS_CATEGORIES = ("aggregation", "time_series", "side_channel",
                    "data_reconstruction", "cross_org")

# which audiences each taint label may never reach
GUARDS = {
    "NDA": ("external", "public"),
    "PII": ("external", "public", "partner"),
    "SALARY": ("external", "public", "partner"),
    "CUSTOMER_DATA": ("external", "public"),
    "EXPORT_CONTROLLED": ("external", "public", "partner"),
    "LEGAL_PRIVILEGE": ("external", "public", "partner"),
    "CREDENTIAL": ("external", "public", "partner"),
    "EXTERNAL": (),
}

INVARIANT_LABELS = {
    "nda_containment": "NDA",
    "pii_guard": "PII",
    "salary_guard": "SALARY",
    "customer_data_guard": "CUSTOMER_DATA",
    "export_control": "EXPORT_CONTROLLED",
    "privilege_guard": "LEGAL_PRIVILEGE",
    "credential_guard": "CREDENTIAL",
}


@pytest.fixture(scope="module")
def reports(cases, world):
    """One full 200-case run per method, shared by the calibration tests."""
    names = ("no_protection", "keyword_dlp", "sentinel_full", "sentinel_no_stt",
             "sentinel_no_cross_domain", "sentinel_no_mapping",
             "sentinel_no_counterfactual", "sentinel_no_provenance")
    return {name: run_method(name, cases, world) for name in names}


# ---------------------------------------------------------------- criterion 1

def test_no_protection_accuracy_is_exactly_the_control_share(reports):
    report = reports["no_protection"]
    assert report.tp == 0 and report.fp == 0
    assert report.accuracy == pytest.approx(0.20, abs=1e-12)


# ---------------------------------------------------------------- criterion 2

def test_keyword_dlp_misses_semantic_channels(reports):
    report = reports["keyword_dlp"]
    assert report.per_category_recall["side_channel"] == 0.0
    assert report.recall <= 0.65


# ---------------------------------------------------------------- criterion 3

def test_sentinel_full_detection_quality(reports):
    report = reports["sentinel_full"]
    assert report.recall >= 0.90
    assert report.precision >= 0.88
    assert report.f1 >= 0.89
    assert report.wall_seconds < 120.0


# ---------------------------------------------------------------- criterion 4

def test_ablation_ordering(reports):
    f1 = {name: reports[name].f1 for name in reports}
    assert (f1["sentinel_full"]
            > f1["sentinel_no_counterfactual"]
            > f1["sentinel_no_mapping"]
            > f1["sentinel_no_cross_domain"]
            > f1["sentinel_no_stt"])
    assert f1["sentinel_no_stt"] <= 0.65


# ---------------------------------------------------------------- criterion 5

def test_invariant_monotonicity_never_flips_block_to_allow():
    invariants = load_default_invariants()
    assert len(invariants) == len(INVARIANT_LABELS)
    for inv in invariants:
        assert inv.monotone, inv.name
        label = INVARIANT_LABELS[inv.name]
        nodes = {
            "doc": NodeRecord(node_id="doc", labels=frozenset({label})),
            "audience:external": NodeRecord(node_id="audience:external",
                                            entity_kind="audience"),
        }
        graph = KnowledgeGraph("MONO", nodes,
                               {("doc", "audience:external", DISCLOSED_TO)})
        action = ActionRecord(actor="probe", verb="send_external",
                              audience="external")
        # 1000 random graph extensions per invariant; any Block->Allow flip raises
        assert assert_monotone(inv, graph, action, trials=1000, seed=5)


# ---------------------------------------------------------------- criterion 6

def _guard_policy():
    blocks = []
    for label, audiences in GUARDS.items():
        if not audiences:
            continue
        quoted = ", ".join(f'"{a}"' for a in audiences)
        blocks.append(
            f"INVARIANT guard_{label.lower()}:\n"
            f'  FOR entity IN graph WHERE entity.has_label("{label}")\n'
            f"  BLOCK action WHERE action.audience IN [{quoted}]\n"
            f'  MESSAGE "guarded label"\n'
        )
    return compile_policy("\n".join(blocks))


def _random_world_nodes(rng, trial):
    """Random node set: unique single-token ids, label-mirrored constraints."""
    labels = list(GUARDS)
    total = rng.randint(2, 50)
    nodes = []
    for i in range(total):
        picked = frozenset(rng.sample(labels, rng.randint(1, 2))) \
            if rng.random() < 0.5 else frozenset()
        blocked = sorted({aud for lab in picked for aud in GUARDS[lab]})
        constraints = (ConstraintPredicate("audience", "not-in", tuple(blocked)),) \
            if blocked else ()
        nodes.append(NodeRecord(node_id=f"asset{trial}x{i}", labels=picked,
                                constraints=constraints))
    return nodes


def test_distributed_verdicts_match_union_graph_oracle():
    invariants = _guard_policy()
    rng = random.Random(20260823)
    blocked_distributed, blocked_oracle = set(), set()
    for trial in range(500):
        nodes = _random_world_nodes(rng, trial)
        n_domains = rng.randint(1, 4)
        domains = [f"D{i}" for i in range(n_domains)]
        assignment = {node.node_id: rng.choice(domains) for node in nodes}

        keystore = KeyStore()
        transport = InProcessTransport()
        sidecars = {}
        for domain in domains + ["ORACLE"]:
            keystore.generate(domain)
        for domain in domains:
            graph = KnowledgeGraph(domain, {
                n.node_id: n for n in nodes if assignment[n.node_id] == domain})
            sidecars[domain] = Sidecar(
                domain, f"{domain}_agent", graph, keystore, invariants=invariants,
                mapper=ExactStringMapper(),
                session=SessionContext(f"{domain}_agent", domain),
                transport=transport)
        union = KnowledgeGraph("ORACLE", {n.node_id: n for n in nodes})
        oracle = Sidecar("ORACLE", "oracle_agent", union, keystore,
                         invariants=invariants, mapper=ExactStringMapper(),
                         session=SessionContext("oracle_agent", "ORACLE"))

        executing = rng.choice(domains)
        mentioned = rng.sample(nodes, rng.randint(1, min(3, len(nodes))))
        audience = rng.choice(AUDIENCES)
        text = "please send " + " ".join(n.node_id for n in mentioned)
        tokens = [sidecars[assignment[n.node_id]].issue(n.node_id)
                  for n in mentioned if assignment[n.node_id] != executing]

        distributed = sidecars[executing].verify(ActionRecord(
            actor=f"{executing}_agent", verb="send_email", audience=audience,
            payload_text=text, attached_tokens=tokens))
        reference = oracle.verify(ActionRecord(
            actor="oracle_agent", verb="send_email", audience=audience,
            payload_text=text))
        if not distributed.allowed:
            blocked_distributed.add(trial)
        if not reference.allowed:
            blocked_oracle.add(trial)
    assert blocked_distributed == blocked_oracle
    assert blocked_oracle  # the sample must actually exercise blocking


# ---------------------------------------------------------------- criterion 7

def test_taint_propagation_is_a_superset_of_provenance():
    vocabulary = Vocabulary()
    labels = list(GUARDS)
    rng = random.Random(7)
    keystore = KeyStore()
    keystore.generate("CHAIN")
    for chain in range(1000):
        nodes = {f"src{lab.lower().replace('_', '')}":
                 NodeRecord(node_id=f"src{lab.lower().replace('_', '')}",
                            labels=frozenset({lab}))
                 for lab in labels}
        graph = KnowledgeGraph("CHAIN", dict(nodes))
        sidecar = Sidecar("CHAIN", "chain_agent", graph, keystore,
                          mapper=ExactStringMapper(),
                          session=SessionContext("chain_agent", "CHAIN"))
        source_ids = list(nodes)
        held = []
        for src in rng.sample(source_ids, rng.randint(1, 3)):
            held.append((sidecar.issue(src),
                         set(graph.get_node(src).labels)))
        expected = set()
        token = held[0][0]
        for step in range(rng.randint(1, 10)):
            parents = rng.sample(held, rng.randint(1, len(held)))
            locals_ = [rng.choice(source_ids)] if rng.random() < 0.3 else []
            expected = set().union(*(lab for _t, lab in parents))
            for src in locals_:
                expected |= set(graph.get_node(src).labels)
            name = f"derived{chain}x{step}"
            sidecar.record_derived(name, [t for t, _l in parents],
                                   local_sources=locals_)
            token = sidecar.issue_derived(name, [t for t, _l in parents])
            held.append((token, set(expected)))
        assert vocabulary.from_bits(token.taint_vec) >= expected, chain


# ---------------------------------------------------------------- criterion 8

def test_every_single_byte_mutation_fails_verification(world):
    rng = random.Random(8)
    keystore = KeyStore()
    for domain in world.graphs:
        keystore.generate(domain)
    vocabulary = Vocabulary()
    now = int(time.time())
    tokens = []
    for i in range(50):
        domain = rng.choice(list(world.graphs))
        graph = world.graphs[domain]
        node = rng.choice(sorted(n.node_id for n in graph.iter_nodes()))
        tokens.append(issue_token(node, graph, keystore, 3600,
                                  agent=f"{domain}_agent", vocabulary=vocabulary,
                                  now=now))
    for token in tokens:
        assert verify_token(token, keystore)
        data = json.dumps(token_to_wire(token), sort_keys=True,
                          separators=(",", ":")).encode("utf-8")
        for _ in range(100):
            mutated = bytearray(data)
            pos = rng.randrange(len(mutated))
            mutated[pos] ^= rng.randint(1, 255)
            try:
                survived = verify_token(
                    token_from_wire(json.loads(bytes(mutated))), keystore)
            except Exception:
                survived = False
            assert not survived, f"mutation at byte {pos} verified"


# ---------------------------------------------------------------- criterion 9

def test_schema_strictness_end_to_end(cases, world):
    # the validator itself rejects any shape drift
    with pytest.raises(SchemaError):
        validate_response_schema({"query_id": "q", "result": True, "extra": 0})
    with pytest.raises(SchemaError):
        validate_response_schema({"query_id": "q"})
    # every response produced in a real cross-domain run passes validation:
    # a single schema failure fails closed, which would block a paired control
    subset = [c for c in cases if c.category in CROSS_CATEGORIES]
    results, report = run_sentinel(subset, world)
    assert report.fp == 0 and report.fn == 0
    assert sum(r.queries_sent for r in results.values()) > 0
    for result in results.values():
        for decision in result.decisions:
            assert not any(r.source == "schema" for r in decision.reasons)


# --------------------------------------------------------------- criterion 10

def test_homomorphic_count_matches_dot_product_oracle():
    public, private = generate_keypair(bits=512)
    rng = random.Random(10)
    for _ in range(200):
        k = rng.randint(1, 64)
        flags = [rng.randint(0, 1) for _ in range(k)]
        weights = [rng.randint(0, 5) for _ in range(k)]
        ciphertexts = [public.scale(public.encrypt(flag), weight)
                       for flag, weight in zip(flags, weights)]
        transcript = he_aggregate_count(public, ciphertexts,
                                        manifest={"k": k})
        expected = sum(f * w for f, w in zip(flags, weights))
        assert decrypt_aggregate(private, transcript) == expected


# --------------------------------------------------------------- criterion 11

def test_checker_agrees_with_template_labels(cases):
    decisions = [evaluate(case.flows) for case in cases]
    labels = [case.label == "attack" for case in cases]
    ratio, disagreements = agreement(decisions, labels,
                                     cases=[c.flows for c in cases])
    assert ratio >= 0.95
    for entry in disagreements:
        assert {"index", "checker", "label", "trace"} <= set(entry)


# --------------------------------------------------------------- criterion 12

def test_median_verification_latency_on_loopback(cases, world):
    subset = [c for c in cases if c.category in ("cross_org", "aggregation")][:30]
    report = run_method("sentinel_full", subset, world, transport="loopback")
    # latency excludes grounding and decomposes into the five phases
    assert report.latency_ms["p50"] < 25.0
    assert set(report.breakdown_ms) == set(BREAKDOWN_KEYS)
    assert all(v >= 0.0 for v in report.breakdown_ms.values())


# --------------------------------------------------------------- criterion 13

def test_scaling_from_4_to_64_mesh_nodes(cases, world):
    sweep = scalability_sweep(cases, world, sizes=(4, 8, 16, 32, 64))
    f1 = {size: report.f1 for size, report in sweep.items()}
    assert f1[4] - f1[64] <= 0.05
    p50 = {size: report.latency_ms["p50"] for size, report in sweep.items()}
    assert p50[64] / p50[4] < 16.0
