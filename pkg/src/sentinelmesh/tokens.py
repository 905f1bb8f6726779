"""Taint tokens: signed provenance records carried across domain boundaries.

A token pins the taint labels and constraints of a source graph node to any
message derived from it.  Tokens are immutable after signing; propagation
works by issuing fresh tokens for derived content, never by editing old ones.
"""

from __future__ import annotations

import base64
import hashlib
import hmac as hmac_mod
import json
import time
import uuid
from dataclasses import dataclass, field, replace
from typing import Any, Optional

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .actions import ActionRecord, MalformedAction, extract_target_scope
from .vocab import Vocabulary

WIRE_VERSION = 1

_NUMERIC_OPS = ("min", "max")
_SET_OPS = ("in", "not-in")
VALID_OPERATORS = ("not-in", "in", "min", "max", "eq")

# wire key <-> operator; the wire uses the short "not" spelling
_OP_TO_WIRE = {"not-in": "not", "in": "in", "min": "min", "max": "max", "eq": "eq"}
_WIRE_TO_OP = {v: k for k, v in _OP_TO_WIRE.items()}


class NodeNotFound(KeyError):
    pass


class InvalidTTL(ValueError):
    pass


class KeyNotFound(KeyError):
    pass


class TokenExpired(Exception):
    """Raised by strict checks on expired tokens; enforcement denies instead."""


@dataclass(frozen=True)
class ConstraintPredicate:
    """A single policy predicate attached to a node or token."""

    attribute: str
    operator: str
    operands: tuple = ()

    def __post_init__(self) -> None:
        if self.operator not in VALID_OPERATORS:
            raise ValueError(f"unknown operator {self.operator!r}")
        object.__setattr__(self, "operands", tuple(self.operands))
        if self.operator in _NUMERIC_OPS:
            if len(self.operands) != 1 or not isinstance(self.operands[0], (int, float)):
                raise ValueError(f"{self.operator} takes exactly one numeric operand")
        elif self.operator in _SET_OPS and not self.operands:
            raise ValueError(f"{self.operator} takes at least one operand")

    def satisfied_by(self, scope: dict[str, Any]) -> bool:
        """Evaluate against scope attributes; anything malformed denies."""
        if self.attribute not in scope:
            return False
        value = scope[self.attribute]
        try:
            if self.operator == "not-in":
                return value not in self.operands
            if self.operator == "in":
                return value in self.operands
            if self.operator == "min":
                return value >= self.operands[0]
            if self.operator == "max":
                return value <= self.operands[0]
            return value == self.operands[0] if self.operands else False
        except TypeError:
            return False


def constraints_to_wire(constraints) -> dict[str, dict[str, Any]]:
    wire: dict[str, dict[str, Any]] = {}
    for c in constraints:
        slot = wire.setdefault(c.attribute, {})
        if c.operator in _NUMERIC_OPS:
            slot[_OP_TO_WIRE[c.operator]] = c.operands[0]
        elif c.operator == "eq":
            slot["eq"] = c.operands[0]
        else:
            slot[_OP_TO_WIRE[c.operator]] = list(c.operands)
    return wire


def constraints_from_wire(wire: dict[str, dict[str, Any]]) -> list[ConstraintPredicate]:
    out = []
    for attribute in sorted(wire):
        for op_key in sorted(wire[attribute]):
            operator = _WIRE_TO_OP[op_key]
            raw = wire[attribute][op_key]
            operands = tuple(raw) if isinstance(raw, list) else (raw,)
            out.append(ConstraintPredicate(attribute, operator, operands))
    return out


@dataclass(frozen=True)
class TaintToken:
    """Signed provenance record <source, taint bits, constraints, lineage>."""

    token_id: str
    source_agent: str
    source_domain: str
    source_node: str
    taint_vec: tuple[int, ...]
    constraints: tuple[ConstraintPredicate, ...]
    lineage: tuple[str, ...]
    issued_at: int
    expires_at: int
    signature: bytes = b""

    def __post_init__(self) -> None:
        if self.expires_at <= self.issued_at:
            raise ValueError("expires_at must be after issued_at")
        if not self.lineage or self.lineage[0] != self.source_agent:
            raise ValueError("lineage must start with the source agent")

    @property
    def source_id(self) -> str:
        return f"ari:graph:{self.source_domain}:node:{self.source_node}"

    def is_expired(self, now: Optional[float] = None) -> bool:
        return (time.time() if now is None else now) >= self.expires_at

    def taints(self, vocabulary: Vocabulary) -> frozenset[str]:
        return vocabulary.from_bits(list(self.taint_vec))


def _payload_dict(token: TaintToken) -> dict[str, Any]:
    return {
        "version": WIRE_VERSION,
        "token_id": token.token_id,
        "source_id": token.source_id,
        "taint_vector": list(token.taint_vec),
        "constraints": constraints_to_wire(token.constraints),
        "lineage": list(token.lineage),
        "timestamp": token.issued_at,
        "expires_at": token.expires_at,
    }


def canonical_serialize(token: TaintToken) -> bytes:
    """Deterministic payload bytes: lexicographic keys, no whitespace, UTF-8.

    The signature field is never part of the payload.
    """
    return json.dumps(
        _payload_dict(token), sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")


def token_to_wire(token: TaintToken) -> dict[str, Any]:
    wire = _payload_dict(token)
    wire["signature"] = base64.b64encode(token.signature).decode("ascii")
    return wire


def token_from_wire(wire: dict[str, Any]) -> TaintToken:
    if wire.get("version") != WIRE_VERSION:
        raise ValueError(f"unsupported token version {wire.get('version')!r}")
    source_id = wire["source_id"]
    parts = source_id.split(":")
    if len(parts) != 5 or parts[0] != "ari" or parts[1] != "graph" or parts[3] != "node":
        raise ValueError(f"malformed source_id {source_id!r}")
    lineage = tuple(wire["lineage"])
    encoded = wire["signature"]
    signature = base64.b64decode(encoded, validate=True)
    # reject non-canonical encodings so distinct wire bytes never alias
    if base64.b64encode(signature).decode("ascii") != encoded:
        raise ValueError("non-canonical signature encoding")
    return TaintToken(
        token_id=wire["token_id"],
        source_agent=lineage[0] if lineage else "",
        source_domain=parts[2],
        source_node=parts[4],
        taint_vec=tuple(wire["taint_vector"]),
        constraints=tuple(constraints_from_wire(wire["constraints"])),
        lineage=lineage,
        issued_at=wire["timestamp"],
        expires_at=wire["expires_at"],
        signature=signature,
    )


class KeyStore:
    """Per-domain signing keys.

    Default mode uses Ed25519 keypairs so verifiers only ever hold public
    keys.  An HMAC mode exists for intra-domain deployments that accept a
    shared secret; the verification API is identical.
    """

    def __init__(self, mode: str = "ed25519"):
        if mode not in ("ed25519", "hmac"):
            raise ValueError(f"unknown key mode {mode!r}")
        self.mode = mode
        self._private: dict[str, Any] = {}
        self._public: dict[str, Any] = {}

    def generate(self, domain: str) -> None:
        if self.mode == "ed25519":
            key = Ed25519PrivateKey.generate()
            self._private[domain] = key
            self._public[domain] = key.public_key()
        else:
            secret = uuid.uuid4().bytes + uuid.uuid4().bytes
            self._private[domain] = secret
            self._public[domain] = secret

    def public_only(self) -> "KeyStore":
        """A verifier-side copy without signing keys (ed25519 mode only)."""
        clone = KeyStore(self.mode)
        clone._public = dict(self._public)
        return clone

    def sign(self, domain: str, payload: bytes) -> bytes:
        try:
            key = self._private[domain]
        except KeyError:
            raise KeyNotFound(domain) from None
        if self.mode == "ed25519":
            return key.sign(payload)
        return hmac_mod.new(key, payload, hashlib.sha256).digest()

    def verify(self, domain: str, payload: bytes, signature: bytes) -> bool:
        try:
            key = self._public[domain]
        except KeyError:
            raise KeyNotFound(domain) from None
        if self.mode == "ed25519":
            assert isinstance(key, Ed25519PublicKey)
            try:
                key.verify(signature, payload)
                return True
            except InvalidSignature:
                return False
        expected = hmac_mod.new(key, payload, hashlib.sha256).digest()
        return hmac_mod.compare_digest(expected, signature)

    def has_domain(self, domain: str) -> bool:
        return domain in self._public


def sign_token(token: TaintToken, keystore: KeyStore) -> TaintToken:
    signature = keystore.sign(token.source_domain, canonical_serialize(token))
    return replace(token, signature=signature)


def verify_token(token: TaintToken, keystore: KeyStore) -> bool:
    if not token.signature:
        return False
    return keystore.verify(token.source_domain, canonical_serialize(token), token.signature)


def issue_token(
    node_id: str,
    graph,
    keystore: KeyStore,
    ttl: float,
    *,
    agent: str,
    vocabulary: Vocabulary,
    inherited_lineage: tuple[str, ...] = (),
    now: Optional[float] = None,
) -> TaintToken:
    """Issue a signed token for one node of the agent's domain graph.

    ``inherited_lineage`` extends the custody chain when the node is derived
    from upstream tainted inputs.
    """
    if ttl <= 0:
        raise InvalidTTL(ttl)
    node = graph.get_node(node_id)
    if node is None:
        raise NodeNotFound(node_id)
    issued_at = int(time.time() if now is None else now)
    token = TaintToken(
        token_id=uuid.uuid4().hex,
        source_agent=agent,
        source_domain=graph.graph_id,
        source_node=node_id,
        taint_vec=tuple(vocabulary.to_bits(node.labels)),
        constraints=tuple(node.constraints),
        lineage=(agent, *inherited_lineage),
        issued_at=issued_at,
        expires_at=issued_at + int(ttl),
    )
    return sign_token(token, keystore)


def is_action_allowed(token: TaintToken, action: ActionRecord, now: Optional[float] = None) -> bool:
    """Check an action against a token's constraints; expired tokens deny."""
    if token.is_expired(now):
        return False
    try:
        scope = extract_target_scope(action)
    except MalformedAction:
        return False
    return all(c.satisfied_by(scope) for c in token.constraints)
