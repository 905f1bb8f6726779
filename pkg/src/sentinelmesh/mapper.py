"""Deterministic text-to-node grounding.

Maps free text onto graph nodes using lexical overlap against node names and
aliases, blended with session provenance signals (originating domain, recent
mentions).  The scorer is deliberately recall-oriented: when a disclosing
action grounds nothing above threshold, the top candidate is returned anyway,
because over-approximating referenced entities is safe while missing one is
not.

The scorer sits behind a small interface so an external model-backed mapper
can be plugged in without touching the enforcement pipeline.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Protocol

from .graph import KnowledgeGraph

_WORD_RE = re.compile(r"[a-z0-9]+")


def _tokens(text: str) -> frozenset[str]:
    return frozenset(_WORD_RE.findall(text.lower()))


@dataclass
class SessionContext:
    """Provenance of the conversation an action belongs to."""

    originating_agent: str = ""
    originating_domain: str = ""
    recent_node_mentions: list[str] = field(default_factory=list)

    def mention(self, node_id: str) -> None:
        if node_id in self.recent_node_mentions:
            self.recent_node_mentions.remove(node_id)
        self.recent_node_mentions.insert(0, node_id)


@dataclass(frozen=True)
class CandidateSet:
    candidates: tuple[tuple[str, float], ...]

    def top(self) -> Optional[str]:
        return self.candidates[0][0] if self.candidates else None

    def __len__(self) -> int:
        return len(self.candidates)


@dataclass(frozen=True)
class MapperConfig:
    lexical_weight: float = 0.6
    domain_weight: float = 0.3
    recency_weight: float = 0.1
    retrieval_cap: int = 15


class Mapper(Protocol):
    def ground(self, text: str, graph: KnowledgeGraph, session: SessionContext,
               threshold: float, disclosing: bool = False) -> set[str]: ...


def _lexical_overlap(text_tokens: frozenset[str], node) -> float:
    """Best token-coverage fraction over the node's name and aliases."""
    best = 0.0
    for phrase in (node.node_id, *node.aliases):
        phrase_tokens = _tokens(phrase.replace("_", " "))
        if not phrase_tokens:
            continue
        best = max(best, len(phrase_tokens & text_tokens) / len(phrase_tokens))
    return best


class DeterministicMapper:
    """Candidate retrieval plus linear provenance-aware scoring."""

    def __init__(self, config: MapperConfig = MapperConfig()):
        self.config = config

    def retrieve_candidates(self, text: str, graph: KnowledgeGraph,
                            session: SessionContext) -> CandidateSet:
        text_tokens = _tokens(text)
        if not text_tokens:
            return CandidateSet(())
        cfg = self.config
        mentions = session.recent_node_mentions
        scored: list[tuple[float, str]] = []
        for node in graph.iter_nodes():
            if node.entity_kind == "audience":
                continue
            lex = _lexical_overlap(text_tokens, node)
            domain = node.attributes.get("domain", graph.graph_id)
            dom = 1.0 if session.originating_domain and domain == session.originating_domain else 0.0
            if node.node_id in mentions:
                rec = max(0.0, 1.0 - mentions.index(node.node_id) / 10.0)
            else:
                rec = 0.0
            score = cfg.lexical_weight * lex + cfg.domain_weight * dom + cfg.recency_weight * rec
            if score > 0.0:
                scored.append((min(1.0, score), node.node_id))
        # descending score; ties resolved by lexicographic node id
        scored.sort(key=lambda pair: (-pair[0], pair[1]))
        top = scored[: cfg.retrieval_cap]
        return CandidateSet(tuple((node_id, score) for score, node_id in top))

    def ground(self, text: str, graph: KnowledgeGraph, session: SessionContext,
               threshold: float = 0.5, disclosing: bool = False) -> set[str]:
        if not 0.0 < threshold <= 1.0:
            raise ValueError(f"threshold must be in (0, 1], got {threshold}")
        candidates = self.retrieve_candidates(text, graph, session)
        hits = {node_id for node_id, score in candidates.candidates if score >= threshold}
        if hits:
            return hits
        if disclosing and len(candidates):
            return {candidates.top()}
        return set()


class ExactStringMapper:
    """Exact-name-only grounding (the degraded-mapping ablation).

    Grounds a node only when its literal id appears in the text; no aliases,
    no provenance, no recall-oriented fallback.
    """

    def ground(self, text: str, graph: KnowledgeGraph, session: SessionContext,
               threshold: float = 0.5, disclosing: bool = False) -> set[str]:
        text_tokens = _tokens(text)
        out = set()
        for node in graph.iter_nodes():
            if node.entity_kind == "audience":
                continue
            name_tokens = _tokens(node.node_id.replace("_", " "))
            if name_tokens and name_tokens <= text_tokens:
                out.add(node.node_id)
        return out


def retrieve_candidates(text: str, graph: KnowledgeGraph, session: SessionContext,
                        config: MapperConfig = MapperConfig()) -> CandidateSet:
    return DeterministicMapper(config).retrieve_candidates(text, graph, session)


def ground(text: str, graph: KnowledgeGraph, session: SessionContext,
           threshold: float = 0.5, disclosing: bool = False,
           config: MapperConfig = MapperConfig()) -> set[str]:
    return DeterministicMapper(config).ground(text, graph, session, threshold, disclosing)
