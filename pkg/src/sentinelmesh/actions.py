"""Action records and the verb table.

Every agent operation the mesh can intercept is an :class:`ActionRecord`.
Verbs are classified as disclosing (they move data toward an audience) or
internal; disclosing verbs carry a default audience used when the action does
not name one explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional


AUDIENCES = ("internal", "external", "partner", "public")


class UnknownVerb(ValueError):
    """Verb is not in the configured verb table; callers must fail closed."""


class MalformedAction(ValueError):
    """Action is structurally invalid (e.g. disclosing verb without audience)."""


@dataclass(frozen=True)
class VerbSpec:
    name: str
    disclosing: bool
    default_audience: Optional[str] = None


# The deployment verb table.  Disclosing verbs emit disclosure facts during
# counterfactual simulation; internal verbs never do.
VERB_TABLE: dict[str, VerbSpec] = {
    spec.name: spec
    for spec in (
        VerbSpec("send_email", disclosing=True, default_audience=None),
        VerbSpec("write_wiki", disclosing=True, default_audience="public"),
        VerbSpec("send_external", disclosing=True, default_audience="external"),
        VerbSpec("publish", disclosing=True, default_audience="public"),
        VerbSpec("read_data", disclosing=False, default_audience="internal"),
        VerbSpec("summarize", disclosing=False, default_audience="internal"),
        VerbSpec("query", disclosing=False, default_audience="internal"),
        VerbSpec("correlate", disclosing=False, default_audience="internal"),
        VerbSpec("access_with_expired_creds", disclosing=False, default_audience="internal"),
        VerbSpec("access_with_cached_session", disclosing=False, default_audience="internal"),
    )
}

DISCLOSING_VERBS = frozenset(v.name for v in VERB_TABLE.values() if v.disclosing)


@dataclass
class ActionRecord:
    """One proposed agent operation, as intercepted by a sidecar."""

    actor: str
    verb: str
    audience: Optional[str] = None
    payload_text: str = ""
    attached_tokens: list = field(default_factory=list)
    attributes: dict[str, Any] = field(default_factory=dict)

    def verb_spec(self) -> VerbSpec:
        try:
            return VERB_TABLE[self.verb]
        except KeyError:
            raise UnknownVerb(self.verb) from None

    @property
    def is_disclosing(self) -> bool:
        return self.verb_spec().disclosing


def extract_target_scope(action: ActionRecord) -> dict[str, Any]:
    """Derive the scope attributes an action targets.

    The scope always contains ``audience``; ``clearance`` is included when the
    action carries one.  A disclosing verb with no audience (explicit or
    default) is malformed and must be blocked by the caller.
    """
    spec = action.verb_spec()
    audience = action.audience or spec.default_audience
    if audience is None:
        raise MalformedAction(f"disclosing verb {action.verb!r} has no audience")
    if audience not in AUDIENCES:
        raise MalformedAction(f"unknown audience {audience!r}")
    scope: dict[str, Any] = {"audience": audience}
    if "clearance" in action.attributes:
        scope["clearance"] = action.attributes["clearance"]
    return scope
