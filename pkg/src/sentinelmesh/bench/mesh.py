"""Mesh assembly and scripted case execution.

A mesh is a set of sidecars, one per deployment node, wired over a transport.
Small meshes co-locate several departments on one sidecar (their graphs are
merged); large meshes add auxiliary filler nodes so routing and fan-out costs
are measured at scale.  ``run_case`` drives one scenario through the mesh the
way cooperating agents would: tokens are issued whenever data moves between
agents, forwarded material is re-recorded as a derived artifact, and every
flow is submitted to the acting agent's sidecar for verification.
"""

from __future__ import annotations

import time
import uuid
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Callable, Optional

from .. import registry_defaults as defaults
from ..actions import DISCLOSING_VERBS, ActionRecord
from ..dsl import CompiledInvariant, compile_policy
from ..graph import KnowledgeGraph, NodeRecord
from ..mapper import DeterministicMapper, SessionContext
from ..sidecar import Decision, Sidecar, SidecarConfig
from ..tokens import KeyStore, TaintToken, issue_token, sign_token
from ..transport import InProcessTransport
from .generate import ScenarioCase
from .world import World


class ScenarioError(ValueError):
    pass


# deployment layouts: which departments share a sidecar at each mesh size
MESH_LAYOUTS: dict[int, tuple[tuple[str, ...], ...]] = {
    4: (("ENGINEERING", "OPS"), ("HR", "FINANCE"), ("MARKETING", "SALES"), ("LEGAL",)),
    7: tuple((d,) for d in defaults.DOMAINS),
}

_PARTNER_SINKS = frozenset({"partner_crm_sync"})


def audience_for_target(target: str) -> str:
    """Resolve a flow target to the audience its disclosure reaches."""
    if target in defaults.SINK_REGISTRY:
        if target in _PARTNER_SINKS:
            return "partner"
        risk = defaults.SINK_REGISTRY[target]
        if risk == "public":
            return "public"
        if risk == "internal":
            return "internal"
        return "external"
    if target in defaults.AGENT_REGISTRY:
        return "external" if target in defaults.BOUNDARY_AGENTS else "internal"
    raise ScenarioError(f"unknown flow target {target!r}")


def layout_for(mesh_size: int) -> tuple[tuple[str, ...], ...]:
    if mesh_size in MESH_LAYOUTS:
        groups = MESH_LAYOUTS[mesh_size]
    elif mesh_size > 7:
        groups = MESH_LAYOUTS[7]
    else:
        raise ScenarioError(f"unsupported mesh size {mesh_size}")
    aux = tuple((f"AUX_{i:02d}",) for i in range(mesh_size - len(groups)))
    return groups + aux


@dataclass
class Mesh:
    sidecars: dict[str, Sidecar]       # keyed by merged node id
    domain_map: dict[str, str]         # department -> node id
    transport: InProcessTransport
    keystore: KeyStore
    config: SidecarConfig

    def sidecar_for(self, domain: str) -> Sidecar:
        return self.sidecars[self.domain_map[domain]]

    def sidecar_for_agent(self, agent: str) -> Sidecar:
        return self.sidecar_for(defaults.AGENT_REGISTRY[agent])

    def close(self) -> None:
        self.transport.close()


def load_default_invariants() -> list[CompiledInvariant]:
    text = resources.files("sentinelmesh").joinpath("policies/default.inv").read_text("utf-8")
    return compile_policy(text)


def _aux_graph(name: str) -> KnowledgeGraph:
    prefix = name.lower()
    nodes = {
        f"{prefix}_doc_{i:02d}": NodeRecord(node_id=f"{prefix}_doc_{i:02d}", entity_kind="document")
        for i in range(10)
    }
    return KnowledgeGraph(name, nodes, set())


def build_mesh(
    world: World,
    mesh_size: int = 7,
    transport: Optional[object] = None,
    config: Optional[SidecarConfig] = None,
    mapper_factory: Optional[Callable[[], object]] = None,
    invariants: Optional[list[CompiledInvariant]] = None,
) -> Mesh:
    layout = layout_for(mesh_size)
    transport = transport if transport is not None else InProcessTransport()
    config = config or SidecarConfig()
    invariants = invariants if invariants is not None else load_default_invariants()
    mapper_factory = mapper_factory or DeterministicMapper

    keystore = KeyStore()
    sidecars: dict[str, Sidecar] = {}
    domain_map: dict[str, str] = {}
    for group in layout:
        node_id = "+".join(group)
        keystore.generate(node_id)
        if group[0].startswith("AUX_"):
            graph = _aux_graph(node_id)
            agent = f"{node_id.lower()}_agent"
        else:
            nodes: dict[str, NodeRecord] = {}
            edges = set()
            for domain in group:
                src = world.graphs[domain]
                nodes.update({n.node_id: n for n in src.iter_nodes()})
                edges.update(src.iter_edges())
                domain_map[domain] = node_id
            graph = KnowledgeGraph(node_id, nodes, edges)
            agent = next(a for a, d in defaults.AGENT_REGISTRY.items() if d == group[0])
        session = SessionContext(originating_agent=agent, originating_domain=node_id)
        sidecars[node_id] = Sidecar(
            domain=node_id,
            agent=agent,
            graph=graph,
            keystore=keystore,
            invariants=invariants,
            mapper=mapper_factory(),
            session=session,
            transport=transport,
            config=config,
        )
    return Mesh(sidecars=sidecars, domain_map=domain_map,
                transport=transport, keystore=keystore, config=config)


@dataclass
class CaseResult:
    case_id: str
    predicted_attack: bool
    decisions: list[Decision] = field(default_factory=list)
    blocked_flow: Optional[int] = None
    queries_sent: int = 0

    @property
    def reasons(self) -> list:
        return [r for d in self.decisions for r in d.reasons]


def _manipulate(token: TaintToken, instruction: str, mesh: Mesh) -> TaintToken:
    """Adversarial token handling applied between custody transfers."""
    if instruction == "tamper":
        bits = list(token.taint_vec)
        bits[0] ^= 1  # clear (or set) a taint bit without re-signing
        return replace(token, taint_vec=tuple(bits))
    if instruction == "forge":
        rogue = KeyStore()
        rogue.generate(token.source_domain)
        return sign_token(replace(token, token_id=uuid.uuid4().hex), rogue)
    if instruction == "expired":
        source = mesh.sidecars[token.source_domain]
        return issue_token(
            token.source_node, source.graph, mesh.keystore, ttl=60,
            agent=token.source_agent, vocabulary=source.vocabulary,
            now=time.time() - 7200,
        )
    raise ScenarioError(f"unknown token instruction {instruction!r}")


def run_case(mesh: Mesh, case: ScenarioCase) -> CaseResult:
    """Execute one scenario chain against the mesh; Block anywhere flags it."""
    result = CaseResult(case_id=case.case_id, predicted_attack=False)
    held: dict[str, list[TaintToken]] = {}
    stt = mesh.config.enable_stt
    flows = case.flows.flows

    for i, (flow, text) in enumerate(zip(flows, case.texts)):
        sidecar = mesh.sidecar_for_agent(flow.actor)
        carried = held.pop(flow.actor, [])
        # a cooperating agent re-records forwarded material as a local derived
        # artifact before acting on it; a token manipulator does not cooperate
        if stt and carried and not case.token_instruction:
            node = sidecar.record_derived(f"note_{case.case_id}_{i}", carried)
            carried = carried + [sidecar.issue_derived(node.node_id, carried)]
        inter_agent = flow.target in defaults.AGENT_REGISTRY and flow.target != flow.actor
        if stt and inter_agent:
            for dtype in flow.data_types:
                if sidecar.graph.get_node(dtype) is not None:
                    carried = carried + [sidecar.issue(dtype)]

        disclosing = flow.verb in DISCLOSING_VERBS
        action = ActionRecord(
            actor=flow.actor,
            verb=flow.verb,
            audience=audience_for_target(flow.target) if disclosing else None,
            payload_text=text,
            attached_tokens=list(carried) if stt else [],
        )
        decision = sidecar.verify(action)
        result.decisions.append(decision)
        result.queries_sent += decision.queries_sent
        if not decision.allowed:
            result.predicted_attack = True
            result.blocked_flow = i
            break

        if inter_agent:
            outgoing = carried
            if case.token_instruction:
                outgoing = [_manipulate(t, case.token_instruction, mesh) for t in carried]
            held.setdefault(flow.target, []).extend(outgoing)
        else:
            held[flow.actor] = carried
    return result
