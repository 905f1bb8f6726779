"""sentinelmesh: distributed taint-token enforcement for agent meshes.

Per-domain sidecars intercept agent actions, ground their natural-language
payloads against a local knowledge graph, simulate the disclosure on a
copy-on-write fork, enforce declarative invariants plus node constraints, and
resolve residual cross-domain obligations through signed taint tokens and
boolean predicate queries -- no raw data ever leaves its owning domain.
"""

__version__ = "0.1.0"

from .actions import ActionRecord
from .dsl import compile_policy, parse, parse_policy
from .graph import KnowledgeGraph, NodeRecord
from .mapper import DeterministicMapper, ExactStringMapper, MapperConfig, SessionContext
from .sidecar import Decision, Sidecar, SidecarConfig
from .tokens import ConstraintPredicate, KeyStore, TaintToken, issue_token, verify_token
from .vocab import Vocabulary

__all__ = [
    "__version__",
    "ActionRecord",
    "compile_policy",
    "parse",
    "parse_policy",
    "KnowledgeGraph",
    "NodeRecord",
    "DeterministicMapper",
    "ExactStringMapper",
    "MapperConfig",
    "SessionContext",
    "Decision",
    "Sidecar",
    "SidecarConfig",
    "ConstraintPredicate",
    "KeyStore",
    "TaintToken",
    "issue_token",
    "verify_token",
    "Vocabulary",
]
